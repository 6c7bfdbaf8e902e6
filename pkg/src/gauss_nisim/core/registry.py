"""
Registry of function families.

A family groups builders that turn a small JSON parameter object into a
VectorFunction (halfspace splits, pluralities of linear forms, serialized
expansions and mixtures). Input files for the CLI name a builder by slug.
"""
from __future__ import annotations

import hashlib
import json
import logging
from threading import RLock
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, ConfigDict

from .errors import ErrorCode, NisimError
from .functions import VectorFunction

logger = logging.getLogger(__name__)

# -----------------------------------------------------------------------------
# Schemas
# -----------------------------------------------------------------------------

class BuilderSpec(BaseModel):
    """Builder specification model."""
    model_config = ConfigDict(from_attributes=True)

    slug: str
    name: str
    description: str
    parameters: Dict[str, Any]
    form: str = "blackbox"

    def digest(self) -> str:
        """SHA256 of the spec; folded into the registry digest of run headers."""
        content = json.dumps(self.model_dump(), sort_keys=True)
        return hashlib.sha256(content.encode()).hexdigest()


class Family(BaseModel):
    """Function family model."""
    model_config = ConfigDict(from_attributes=True)

    name: str
    description: str
    version: Optional[str] = None


# -----------------------------------------------------------------------------
# Registry
# -----------------------------------------------------------------------------

# Builder type alias: (params, context) -> function
Builder = Callable[[dict, dict], VectorFunction]


class FamilyRegistry:
    """
    Central registry for all function families and their builders.
    Thread-safe; one global instance is used by the CLI.
    """

    def __init__(self):
        self._lock = RLock()
        self._families: Dict[str, Family] = {}
        self._builders: Dict[str, Dict[str, object]] = {}    # slug -> {"spec": BuilderSpec, "builder": Builder}

    def register_family(self, name: str, description: str, version: Optional[str] = None) -> None:
        with self._lock:
            self._families[name] = Family(name=name, description=description, version=version)
            logger.debug(f"Registered family: {name}")

    def register_builder(self, spec: BuilderSpec, builder: Builder) -> None:
        with self._lock:
            self._builders[spec.slug] = {"spec": spec, "builder": builder}
            logger.debug(f"Registered builder: {spec.slug}")

    def list_families(self) -> List[Family]:
        with self._lock:
            return list(self._families.values())

    def get_spec(self, slug: str) -> Optional[BuilderSpec]:
        with self._lock:
            rec = self._builders.get(slug)
            return rec["spec"] if rec else None

    def get_builder(self, slug: str) -> Optional[Builder]:
        with self._lock:
            rec = self._builders.get(slug)
            return rec["builder"] if rec else None

    def list_specs(self, family: Optional[str] = None) -> List[BuilderSpec]:
        """
        List builder specifications.
        If family is provided, filters builders by slug prefix.
        """
        with self._lock:
            specs = [v["spec"] for v in self._builders.values()]
            if not family:
                return specs
            return [s for s in specs if s.slug.startswith(f"{family}.")]

    def digest(self) -> str:
        """One hash over every registered builder spec and family version."""
        with self._lock:
            h = hashlib.sha256()
            for name in sorted(self._families):
                h.update(f"{name}@{self._families[name].version}".encode())
            for slug in sorted(self._builders):
                h.update(self._builders[slug]["spec"].digest().encode())
            return h.hexdigest()

    def build(self, slug: str, params: dict, context: Optional[dict] = None) -> VectorFunction:
        spec = self.get_spec(slug)
        builder = self.get_builder(slug)
        if spec is None or builder is None:
            raise NisimError(ErrorCode.UNKNOWN_FAMILY, f"No function builder registered as {slug!r}",
                             {"known": sorted(s.slug for s in self.list_specs())})
        logger.debug(f"build {slug} (spec {spec.digest()[:12]})")
        try:
            return builder(params, context or {})
        except NisimError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise NisimError(ErrorCode.INVALID_INPUT, f"Invalid parameters for {slug}: {e}") from e

    def clear(self) -> None:
        """Clear the registry (useful for testing)."""
        with self._lock:
            self._families.clear()
            self._builders.clear()


# Global instance
registry = FamilyRegistry()

# -----------------------------------------------------------------------------
# Helper functions
# -----------------------------------------------------------------------------

def register_family(name: str, description: str, version: Optional[str] = None) -> None:
    registry.register_family(name, description, version)

def register_builder(spec: BuilderSpec, builder: Builder) -> None:
    registry.register_builder(spec, builder)

def list_specs(family: Optional[str] = None) -> List[BuilderSpec]:
    return registry.list_specs(family)

def get_builder(slug: str) -> Optional[Builder]:
    return registry.get_builder(slug)
