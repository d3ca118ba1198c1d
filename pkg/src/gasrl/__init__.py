"""Growing action spaces: curriculum RL over nested action hierarchies."""

__version__ = "0.1.0"
