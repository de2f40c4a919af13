"""
Brain network fine-tuning: functional connectivity, adapter in front of a
frozen self-attention encoder, contrastive + reconstruction training and
SVM diagnosis.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

   http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
from abc import abstractmethod
import os
import sys
import signal

VERSION = "0.1.0"


def signal_handler(sig, frame):
    """
    required for non-tty python runs to interrupt
    :param frame:
    :param sig:
    """
    raise ManualShutdown()


def install_signal_handlers():
    """
    Turn SIGINT/SIGTERM into ManualShutdown, called by CLI only
    """
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)


class RCProvider(object):
    """
    Abstract return code provider
    """

    @abstractmethod
    def get_rc(self):
        """
        Must be implemented in subclasses
        """
        pass


class ManualShutdown(KeyboardInterrupt, RCProvider):
    def get_rc(self):
        """
        Returns manual shutdown rc
        :return: int
        """
        return 1


class ContractError(RuntimeError, RCProvider):
    """
    Violated call contract, like double backward or missing gradient
    """

    def get_rc(self):
        return 1


class ConfigurationError(ValueError, RCProvider):
    """
    Invalid settings or inconsistent phase/freeze flags
    """

    def get_rc(self):
        return 2


class DataFormatError(ValueError, RCProvider):
    """
    Unreadable dataset, checkpoint or mismatching data shapes
    """

    def get_rc(self):
        return 3


class DimensionError(DataFormatError):
    """
    Operand shapes do not agree
    """
    pass


class DegenerateInputError(DataFormatError):
    """
    Input is valid by shape but numerically unusable, like zero variance
    """
    pass


class InputError(DataFormatError):
    """
    Empty cohort, single-class labels and alike
    """
    pass


class NumericalFailure(ArithmeticError, RCProvider):
    """
    NaN or Inf detected in a loss value

    :type epoch: int
    """

    def __init__(self, message, epoch=None):
        super(NumericalFailure, self).__init__(message)
        self.epoch = epoch

    def get_rc(self):
        return 4


def get_configs_dir():
    """
    Generate configs dir path on install
    :return: str
    """
    path = os.getenv("VIRTUAL_ENV", "") \
        if os.getenv("VIRTUAL_ENV", "") \
        else os.path.splitdrive(sys.executable)[0]
    path += os.path.sep + os.path.join("etc", "bnft.d")
    return path
