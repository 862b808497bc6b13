"""Transition radiation of spin-1/2 wave packets crossing an ideal mirror."""
from .errors import (AccuracyWarning, ChannelClosed, ChannelClosedOnSupport, ConfigError,
                     OverlapViolation, PacketConfigError, RegimeViolation, RegimeWarning,
                     TransradError, UnknownForm)
from .kinematics import (ApplicabilityContext, ParticleParams, PhotonKinematics, PolarizationBasis,
                         ScatteringKinematics, applicability, build_polarization,
                         recoil_approximations, solve_final_momentum)
from .dirac import SpinDensityMatrix, brute_force_tensor, build_spinor, gamma_basis, spin_four_vector
from .wavepackets import (GaussianSuperposition, SpinSuperposition, TwistedPacket,
                          phase_invariance_witness)
from .radiation import (RadiationResult, ScanGrid, closed_form, integrand_contracted,
                        integrand_general, probability, probability_polarization_summed, scan)

__version__ = "0.1.0"
