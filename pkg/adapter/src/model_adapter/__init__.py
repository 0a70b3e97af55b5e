from .features import export_features, resolve_extractor
from .frames import (
    FrameError,
    PROTOCOL_VERSION,
    read_handshake,
    read_request,
    write_handshake,
    write_response,
)
from .models import constant, echo_rect, resolve_model
from .serve import AdapterConfig, serve

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "FrameError",
    "PROTOCOL_VERSION",
    "constant",
    "echo_rect",
    "export_features",
    "read_handshake",
    "read_request",
    "resolve_extractor",
    "resolve_model",
    "serve",
    "write_handshake",
    "write_response",
]
