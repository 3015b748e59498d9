"""fujitalab: a numerical laboratory for u_t = Delta u + f(u) on rotationally symmetric model manifolds.

The package checks the spectral dichotomy of the paper: blow-up of every
nontrivial solution when f'(0) > lambda_1(M), global existence for small data
when f(s) <= alpha s near 0 with alpha <= lambda_1(M).

Modules: manifold (geometry), spectral (radial -Delta, lambda_1), heat
(semigroup and H^3 kernel), reaction (nonlinearities), solver (IMEX time
stepping, blow-up detection, Duhamel cross-check), diagnostics (proof
monitors), classifier (theorem checklists), config/experiment/cli (harness),
acceptance (the acceptance matrix).
"""
from .classifier import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .diagnostics import *  # noqa: F401,F403
from .experiment import *  # noqa: F401,F403
from .grid import *  # noqa: F401,F403
from .heat import *  # noqa: F401,F403
from .manifold import *  # noqa: F401,F403
from .reaction import *  # noqa: F401,F403
from .solver import *  # noqa: F401,F403
from .spectral import *  # noqa: F401,F403

__version__ = "0.1.0"
