"""Generalized N-functions, Sobolev conjugates and Morrey-type estimates.

The modules build on each other:

* :mod:`~morreykit.exprlang`   expression language for coefficients and test functions
* :mod:`~morreykit.nfunction`  N-function families, conjugates, inverses, x-gradients
* :mod:`~morreykit.calculus`   Sobolev conjugate, T(x), Morrey modulus mu(x, s)
* :mod:`~morreykit.conditions` grid certification of structural conditions
* :mod:`~morreykit.modular`    grid functions, modulars and Luxemburg norms
* :mod:`~morreykit.morrey`     empirical Morrey estimate and Hoelder seminorm
* :mod:`~morreykit.cli`        command-line front end
"""

from .calculus import (limit_T, morrey_modulus, morrey_modulus_many, sobolev_conjugate,
                       sobolev_conjugate_inverse)
from .conditions import (ConditionReport, check_delta2, check_much_less_than, check_P3,
                         check_P5, check_P5_star, check_P5_tilde, verify_prop_Aa)
from .errors import ConvergenceError, DivergenceError, DomainError, MorreyKitError, P3Violation
from .exprlang import evaluate, parse, to_source
from .modular import (GridFunction, gradient, gradient_norm, holder_pairing, luxemburg_norm,
                      modular_integral, sample)
from .morrey import (MorreyReport, empirical_morrey_check, holder_seminorm,
                     reference_constant, select_sigma)
from .nfunction import (ConjugateModel, Custom, Domain, DoublePhase, LogType, NFunction,
                        VariableExponent, make_family)

__version__ = "0.1.0"
