"""Native language identification from signed Wikipedia talk-page comments."""

__version__ = "0.1.0"
