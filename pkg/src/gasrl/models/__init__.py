from .qset import QValueSet, compose_control_q, greedy_actions, joint_value
from .control import ControlValueModel
from .multiagent import MultiAgentValueModel

__all__ = [
    "QValueSet",
    "compose_control_q",
    "greedy_actions",
    "joint_value",
    "ControlValueModel",
    "MultiAgentValueModel",
]
