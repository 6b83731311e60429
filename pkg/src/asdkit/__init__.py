"""asdkit: from-scratch ML toolkit and screening service for ASD screening data."""

__version__ = "0.1.0"
