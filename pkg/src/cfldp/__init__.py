"""Large deviations of continued-fraction denominators.

Modules: :mod:`.cf_core` (digits, convergents, cylinders), :mod:`.thermo_rate`
(pressure and rate function), :mod:`.cylinder_tail` (exact tails by
enumeration), :mod:`.mc_sampler` (Monte Carlo tails), :mod:`.bounds` and
:mod:`.cli`.
"""

__version__ = "0.1.0"
