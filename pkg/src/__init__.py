"""Token- and pixel-level attention grounding for a desk-scale diffusion model."""

__version__ = "0.1.0"
