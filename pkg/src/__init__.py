"""
automaton-aag - automaton groups as platforms for the Anshel-Anshel-Goldfeld key agreement.
"""

from .affine import AffineElement, AffineGroup, affine_is_trivial
from .attack import (
    AttackInstance,
    AttackReport,
    AttackResult,
    AttackStatus,
    recover_key,
    single_conjugacy,
    solve_simultaneous,
)
from .automaton import AutomatonGroup, GeneratorWord, MealyAutomaton, RewritingRules
from .config import ContractionBudget, Settings
from .contraction import Nucleus, compute_nucleus
from .errors import ExchangeError, FailureCode, ToolkitError
from .platforms import (
    GOmegaSpec,
    HanoiConfig,
    PlatformDescriptor,
    PlatformId,
    affine,
    basilica,
    g_omega,
    get_platform,
    grigorchuk,
    hanoi,
    hanoi_legal_move,
    universal,
)
from .portrait import (
    Portrait,
    canonical_portrait,
    deserialize_portrait,
    portrait,
    portrait_invert,
    portrait_multiply,
    serialize_portrait,
)
from .protocol import (
    AagSession,
    PrivateKey,
    PublicParams,
    SharedKey,
    Side,
    Transcript,
    Transmission,
    derive_shared,
    exchange_local,
    gen_private,
    make_params,
    make_transmission,
    serialize_key,
)
from .wire import Role, run_exchange


__version__ = "1.0.0"
__all__ = [
    # Automaton core
    "MealyAutomaton",
    "RewritingRules",
    "AutomatonGroup",
    "GeneratorWord",
    "Nucleus",
    "compute_nucleus",
    "ContractionBudget",
    "Portrait",
    "portrait",
    "canonical_portrait",
    "portrait_multiply",
    "portrait_invert",
    "serialize_portrait",
    "deserialize_portrait",

    # Platforms
    "PlatformDescriptor",
    "PlatformId",
    "GOmegaSpec",
    "HanoiConfig",
    "grigorchuk",
    "g_omega",
    "basilica",
    "universal",
    "hanoi",
    "hanoi_legal_move",
    "affine",
    "AffineElement",
    "AffineGroup",
    "affine_is_trivial",
    "get_platform",

    # Key agreement
    "PublicParams",
    "PrivateKey",
    "Side",
    "Transmission",
    "SharedKey",
    "AagSession",
    "Transcript",
    "make_params",
    "gen_private",
    "make_transmission",
    "derive_shared",
    "serialize_key",
    "exchange_local",

    # Attack
    "AttackInstance",
    "AttackResult",
    "AttackStatus",
    "AttackReport",
    "solve_simultaneous",
    "single_conjugacy",
    "recover_key",

    # Wire
    "Role",
    "run_exchange",

    # Errors
    "ToolkitError",
    "ExchangeError",
    "FailureCode",
    "Settings",
]
