from .harness import (
    BatchItem,
    BrowserCrashed,
    NavigationTimeout,
    ProtocolError,
    RenderJob,
    RenderResult,
    ScriptError,
    default_engine,
    render,
    render_batch,
)

__all__ = [
    "BatchItem", "BrowserCrashed", "NavigationTimeout", "ProtocolError",
    "RenderJob", "RenderResult", "ScriptError", "default_engine",
    "render", "render_batch",
]
