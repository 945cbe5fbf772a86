"""Pulsed SPDC biphoton source modeling: apodized poling, JSA purity, spectrometers and HOM."""

__version__ = "0.1.0"

from .errors import (BiphotonError, CalibrationError, ConfigError, EmptyDataError, FitError,
                     InvalidArgument, ParseError, RangeError, ResolutionError)
from .spectral import (DispersionModel, FrequencyGrid, PumpSpectrum, build_grid, calibrate_gvm,
                       delta_k, pump_amplitude)
from .poling import (PolingDesign, apodized_duty_cycle, dfg_scan, phase_matching_amplitude,
                     uniform_poling)
from .jsa import (JointSpectralAmplitude, SchmidtReport, apply_bandpass, build_jsa,
                  entanglement_witness, marginals, purity_from_jsi, schmidt_decompose,
                  side_lobe_suppression, time_bandwidth_check)
from .spectrometer import (CoincidenceHistogram, SpectrometerConfig, TimeTagRecord,
                           arrival_time, heralding_efficiency, ingest_time_tags,
                           reconstruct_jsi, resolution_estimate, simulate_coincidences)
from .interferometry import (HomScan, VisibilityReport, field_autocorrelation, hom_scan,
                             imperfect_visibility, visibility)
