from .replay import NStepSegment, ReplayBuffer, SegmentQueue, Transition
from .control_loop import ControlTrainer, run_control_training
from .micro_loop import MicroTrainer, run_microbattle_training

__all__ = [
    "NStepSegment",
    "ReplayBuffer",
    "SegmentQueue",
    "Transition",
    "ControlTrainer",
    "run_control_training",
    "MicroTrainer",
    "run_microbattle_training",
]
