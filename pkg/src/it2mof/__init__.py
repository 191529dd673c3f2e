"""Co-design toolkit for interval type-2 fuzzy systems: memory output-feedback
controller synthesis via matrix-inequality programs, plus a closed-loop
simulator with a memory dynamic event trigger, stochastic fading channel and
actuator failure model."""

__version__ = "0.1.0"

from .channel import FadingConfig, fade_packet, sample_fade, sample_fades
from .controller import (
    ControllerGains,
    FailureConfig,
    apply_failure,
    compute_control,
)
from .kernel import active_kernel
from .lmi import (
    FouPartition,
    LmiProgram,
    SynthesisGivens,
    assemble_psi,
    assemble_theorem1,
    assemble_theorem2,
    compute_fou_bounds,
    verify_design,
)
from .model import (
    IT2MembershipSpec,
    IT2Plant,
    MembershipRule,
    eval_normalized_memberships,
    step_plant,
)
from .sim import (
    ClosedLoopScenario,
    SimTrace,
    decay_envelope,
    empirical_hinf,
    run,
    run_ensemble,
    triggering_rate,
)
from .synth import (
    CvxpyBackend,
    DesignResult,
    default_backend,
    minimize_gamma,
    recover_gains,
    theta_search,
)
from .trigger import TriggerConfig, TriggerState, check_and_update, detm_check, validate
