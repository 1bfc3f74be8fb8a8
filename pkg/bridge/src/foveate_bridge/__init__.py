"""Oracle-protocol bridge to real models (stub backends for CI)."""

from .server import Bridge, serve_http, serve_stdio

__version__ = "0.1.0"
