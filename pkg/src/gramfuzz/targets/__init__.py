"""Bundled instrumented toy targets, keyed by CLI name."""

from . import minijs, plist_xml

REGISTRY = {
    "toy-minijs": minijs.run,
    "toy-xml": plist_xml.run,
}

__all__ = ["REGISTRY", "minijs", "plist_xml"]
