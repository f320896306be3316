"""Config package marker."""
