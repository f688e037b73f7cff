"""forrlab: a desk-scale lab for the XOR-lifted forrelation problem.

Submodules:

* :mod:`forrlab.boolean_fourier` - dense transforms, convolution, level
  masses, multilinear extension over {-1,1}^n;
* :mod:`forrlab.forrelation_dist` - the forrelation functional, its coupled
  Gaussian / sign / lifted input distributions, moment audits, instances;
* :mod:`forrlab.quantum_sim` - state-vector simulation of the
  {H, CNOT, R_pi/8, oracle, measure} gate set and the swap-test subroutines;
* :mod:`forrlab.protocol` - the simultaneous-message quantum protocol and
  the rectangle-partition Fourier audit of classical protocols;
* :mod:`forrlab.cli` - seeded experiment runner.

The THREADS environment variable caps internal parallelism (it seeds the
usual BLAS/OpenMP knobs before numpy loads).  Results never depend on it:
every kernel that lands in an output record is an elementwise or
fixed-order reduction.
"""

import os as _os

if "THREADS" in _os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["THREADS"])

from .boolean_fourier import (
    FourierSpectrum,
    FunctionTable,
    SignVector,
    convolve,
    fwht,
    inverse_spectrum,
    level_mass,
    multilinear_eval,
    spectrum,
)
from .errors import (
    ForrlabError,
    PartitionError,
    ResourceLimitError,
    SamplingFailureError,
)
from .forrelation_dist import (
    ForrParams,
    InstanceMode,
    Label,
    LiftedInstance,
    classify,
    forr,
    gaussian_moment,
    generate_instance,
    planted_instance,
    sample_forrelation,
    sample_gaussian,
    sample_lifted,
    truncate,
)
from .protocol import (
    QuantumProtocolConfig,
    RectanglePartition,
    advantage,
    default_copies,
    eval_partition,
    l2_audit,
    majority_amplify,
    protocol_H,
    run_quantum_protocol,
)
from .quantum_sim import (
    Circuit,
    StateVector,
    apply_gate,
    bell_pairs,
    controlled_h,
    e_operator,
    swap_test,
)

__version__ = "0.1.0"
