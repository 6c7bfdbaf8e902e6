"""Plugin system for function families.

Builtin families live in the families/ directory; third-party packages
can add more through the ``gauss_nisim.families`` entry-point group.
Either way a plugin exposes ``setup(registrar)``.
"""

from __future__ import annotations

import logging
from importlib import import_module
from importlib.metadata import entry_points
from pathlib import Path
from typing import Optional

from .core.errors import ErrorCode, NisimError
from .core.functions import VectorFunction
from .core.registry import Builder, BuilderSpec, register_builder, register_family, registry

logger = logging.getLogger(__name__)

_loaded = False


class Registrar:
    """API for plugins to register families and builders."""

    def family(self, name: str, description: str, version: str = "1.0"):
        """Register a function family.

        Parameters
        ----------
        name : str
            Unique name, used as the slug prefix of its builders
        description : str
            Human-readable description of the family
        version : str, optional
            Version of the family, defaults to "1.0"
        """
        register_family(name, description, version)

    def builder(self, spec: BuilderSpec, builder: Builder):
        """Register a builder.

        Parameters
        ----------
        spec : BuilderSpec
            Slug, description and JSON schema of the parameters
        builder : Callable
            ``builder(params, context) -> VectorFunction``
        """
        register_builder(spec, builder)


def load_builtin_families():
    """Import every module in families/ and call its setup()."""
    base = Path(__file__).resolve().parent / "families"
    if not base.exists():
        return

    for py in sorted(base.glob("*.py")):
        if py.name.startswith("_"):
            continue
        try:
            mod = import_module(f"{__package__}.families.{py.stem}")
            if hasattr(mod, "setup"):
                mod.setup(Registrar())
        except ImportError as e:
            logger.warning(f"Failed to load builtin family {py.stem}: {e}")


def load_entrypoint_plugins(group: str = "gauss_nisim.families"):
    """Load external families registered through Python entry points.

    Parameters
    ----------
    group : str, optional
        The entry point group to search for plugins
    """
    for ep in entry_points(group=group):
        try:
            setup_fn = ep.load()
            setup_fn(Registrar())
        except Exception as e:
            logger.warning(f"Failed to load plugin {ep.name}: {e}")


def ensure_loaded() -> None:
    global _loaded
    if not _loaded:
        load_builtin_families()
        load_entrypoint_plugins()
        _loaded = True


# Serialized artifacts are recognised by their top-level keys.
_ARTIFACT_BUILDERS = (
    ("terms", "serialized.ppf_mixture"),
    ("outer", "serialized.factored_poly"),
    ("inner", "serialized.projected_poly"),
    ("coeffs", "serialized.truncated_series"),
)


def function_from_json(data: dict, context: Optional[dict] = None) -> VectorFunction:
    """Build a function from ``{"family": slug, "params": {...}}`` or a serialized artifact."""
    ensure_loaded()
    if "family" in data:
        return registry.build(data["family"], data.get("params", {}), context)
    if isinstance(data.get("function"), dict):
        return function_from_json(data["function"], context)
    if data.get("form") == "projected_poly":
        return registry.build("serialized.projected_poly", data, context)
    for key, slug in _ARTIFACT_BUILDERS:
        if key in data:
            return registry.build(slug, data, context)
    raise NisimError(ErrorCode.INVALID_INPUT, "Function file names no family and is not a known artifact",
                     {"keys": sorted(data)})
