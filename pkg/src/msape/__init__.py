"""Multi-source transformer for automatic post-editing, on a small numpy autodiff core."""

__version__ = "0.1.0"
