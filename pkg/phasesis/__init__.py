#  Copyright 2026 The phasesis authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.

__author__ = "The phasesis authors"
__copyright__ = "Copyright 2026 The phasesis authors"

__license__ = "Apache 2.0"
__version__ = "1.0.0"

from phasesis import models
from phasesis.config import DEFAULT_SETTINGS, Settings
from phasesis.errors import AuditError, FitError, InsufficientDataError, InvalidPhaseTypeError, NetworkFormatError, \
    NumericalError, PhasesisError, RenderError, SizeError
from phasesis.fitting import FitOptions, FitResult, FitTarget, fit_phase_type
from phasesis.models import GenesisModel, Network, PhaseType, StabilityReport, Verdict
from phasesis.simulation import EventLog, PrevalenceSeries, estimate_decay_rate, estimate_prevalence, \
    extinction_time, simulate_event_driven, simulate_reference_sde
from phasesis.stability import analyze, build_bound_matrix, build_exact_generator, certify_stability, \
    decay_rate_bound, enumerate_exact_states, exact_decay_rate, mean_extinction_time
