"""CLI configuration: backend profiles, directories, parallelism.

Example ``mascollab.json``::

    {
      "profiles": {
        "reasoner": {"kind": "http", "endpoint": "http://localhost:8000/v1",
                     "model": "my-reasoning-model",
                     "api_key_env": "OPENAI_API_KEY", "temperature": 0.6, "max_tokens": 4096},
        "mock": {"kind": "mock", "script": "mock_script.json"},
        "sbert": {"kind": "embedding", "endpoint": "http://localhost:8001/v1",
                  "model": "sentence-transformers/all-MiniLM-L6-v2"}
      },
      "default_backend": "reasoner",
      "embedder": "sbert",
      "paths": {"roles_dir": "roles", "runs_dir": "runs", "reports_dir": "reports"},
      "parallelism": 4
    }

Relative paths resolve against the config file's directory. Credentials are
only ever read from the environment variable a profile names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    HashEmbedder,
    HttpChatBackend,
    HttpEmbedder,
    ScriptedBackend,
)

DEFAULT_CONFIG_NAME = "mascollab.json"


class ConfigError(ValueError):
    pass


@dataclass
class CliConfig:
    profiles: dict[str, dict] = field(default_factory=dict)
    roles_dir: Path = Path("roles")
    runs_dir: Path = Path("runs")
    reports_dir: Path = Path("reports")
    parallelism: int = 1
    default_backend: str | None = None
    embedder: str = "hash"
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path: str | Path | None = None) -> CliConfig:
        if path is None:
            candidate = Path(DEFAULT_CONFIG_NAME)
            if not candidate.exists():
                return cls()
            path = candidate
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent
        paths = data.get("paths", {})
        return cls(
            profiles=data.get("profiles", {}),
            roles_dir=base / paths.get("roles_dir", "roles"),
            runs_dir=base / paths.get("runs_dir", "runs"),
            reports_dir=base / paths.get("reports_dir", "reports"),
            parallelism=int(data.get("parallelism", 1)),
            default_backend=data.get("default_backend"),
            embedder=data.get("embedder", "hash"),
            base_dir=base,
        )

    def profile(self, name: str | None) -> tuple[str, dict]:
        name = name or self.default_backend
        if not name:
            raise ConfigError("no backend profile given and no default_backend configured")
        if name not in self.profiles:
            raise ConfigError(f"unknown backend profile {name!r}; known: {sorted(self.profiles)}")
        return name, self.profiles[name]

    def sampling(self, name: str | None) -> dict:
        _, prof = self.profile(name)
        return {
            "temperature": float(prof.get("temperature", DEFAULT_TEMPERATURE)),
            "max_tokens": int(prof.get("max_tokens", DEFAULT_MAX_TOKENS)),
        }

    def make_backend(self, name: str | None):
        name, prof = self.profile(name)
        kind = prof.get("kind", "http")
        if kind == "mock":
            if "script" not in prof:
                raise ConfigError(f"mock profile {name!r} needs a 'script' path")
            return ScriptedBackend.from_file(self.base_dir / prof["script"], delay_ms=int(prof.get("delay_ms", 0)))
        if kind == "http":
            for key in ("endpoint", "model"):
                if key not in prof:
                    raise ConfigError(f"http profile {name!r} needs {key!r}")
            return HttpChatBackend(
                prof["endpoint"],
                prof["model"],
                api_key_env=prof.get("api_key_env"),
                timeout_s=float(prof.get("timeout_s", 300)),
                max_in_flight=int(prof.get("max_in_flight", 8)),
            )
        raise ConfigError(f"profile {name!r} has unsupported kind {kind!r} for chat")

    def make_embedder(self, name: str | None = None):
        name = name or self.embedder
        if name == "hash" or name.startswith("hash-"):
            dim = int(name.split("-", 1)[1]) if "-" in name else 64
            return HashEmbedder(dim)
        _, prof = self.profile(name)
        if prof.get("kind") != "embedding":
            raise ConfigError(f"profile {name!r} is not an embedding profile")
        return HttpEmbedder(
            prof["endpoint"],
            prof["model"],
            api_key_env=prof.get("api_key_env"),
            timeout_s=float(prof.get("timeout_s", 120)),
            max_in_flight=int(prof.get("max_in_flight", 8)),
        )

    def snapshot(self, name: str | None) -> dict:
        """Profile description safe to persist: no credentials, no env-var names."""
        name, prof = self.profile(name)
        keep = {k: prof[k] for k in ("kind", "model", "endpoint") if k in prof}
        return {"profile": name, **keep}
