from .control import Acrobot, ControlState, MountainCar, StepOutcome

__all__ = ["Acrobot", "ControlState", "MountainCar", "StepOutcome"]
