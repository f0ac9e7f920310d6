from convpool.envs.base import Env, EnvSpec, StepResult
from convpool.envs.balance_beam import BalanceBeam, BalanceBeamState
from convpool.envs.blind_bandits import BlindBandits, BlindBanditsState
from convpool.envs.layouts import CANONICAL_LAYOUTS, Layout, LayoutError, load_layout, parse_layout
from convpool.envs.overcooked import Overcooked, OvercookedState

__all__ = [
    "Env",
    "EnvSpec",
    "StepResult",
    "BalanceBeam",
    "BalanceBeamState",
    "BlindBandits",
    "BlindBanditsState",
    "CANONICAL_LAYOUTS",
    "Layout",
    "LayoutError",
    "load_layout",
    "parse_layout",
    "Overcooked",
    "OvercookedState",
]


def make_env(name: str, **kwargs) -> Env:
    """Instantiate an environment by name (config-file entry point)."""
    makers = {
        "blind_bandits": BlindBandits,
        "balance_beam": BalanceBeam,
        "overcooked": Overcooked,
    }
    if name not in makers:
        raise ValueError(f"unknown env {name!r}; expected one of {sorted(makers)}")
    return makers[name](**kwargs)
