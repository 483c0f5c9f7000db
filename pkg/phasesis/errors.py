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


class PhasesisError(Exception):
    """Base class for failures raised while analysing or simulating a model."""
    pass


class SizeError(PhasesisError):
    """A matrix or state space would exceed a configured cap.

    Attributes
    ----------
    value: :class:`int`
        The size that was requested.
    cap: :class:`int`
        The configured limit.
    """
    def __init__(self, message, value=None, cap=None):
        super().__init__(message)
        self.value = value
        self.cap = cap


class NumericalError(PhasesisError):
    """An eigensolver or an iterative method failed to produce a trustworthy result."""
    pass


class FitError(PhasesisError):
    """Phase-type fitting diverged.

    Attributes
    ----------
    result: :class:`phasesis.fitting.FitResult`
        The last iterate, for inspection.
    """
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class AuditError(PhasesisError):
    """The reference simulator found a state that breaks the vectorial representation.

    Attributes
    ----------
    context: :class:`dict`
        The jump number, clock, fired counter and the states before and after the jump.
    """
    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


class InsufficientDataError(PhasesisError):
    """Too few usable points to estimate a quantity."""
    pass


class InvalidPhaseTypeError(ValueError):
    """The pair (initial, subgenerator) is not a valid phase-type representation."""
    pass


class NetworkFormatError(ValueError):
    """An edge list could not be turned into a valid network.

    Attributes
    ----------
    line: :class:`int`, optional
        The 1-based line number where the problem was found.
    """
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RenderError(ValueError):
    """A result table cannot be rendered: a column is missing or the selected panel is empty."""
    pass
