"""Moving-well transport: waveforms, motion integration and DAC/noise scans."""

from .dynamics import (
    DEFAULT_DT,
    BatchResult,
    MotionalTrajectory,
    energy_gain_quanta,
    integrate_batch,
    integrate_family,
    integrate_motion,
)
from .scans import (
    DacScan,
    LinearTransportFamily,
    PassEstimate,
    ambient_noise_spec,
    dac_resonance_scan,
    expected_noise_gain,
    leg_duration_for_crossing,
    optimize_update_rate,
    per_pass_gain_estimate,
    resonance_fwhm,
)
from .waveform import (
    PATHS,
    ConstantFrequency,
    GaussianBumpProfile,
    Segment,
    TransportWaveform,
    canonical_path,
    design_waveform,
    linear_transport,
    sample_zoh,
    static_waveform,
    waypoint_waveform,
)
