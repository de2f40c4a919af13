"""
Synthetic labeled cohorts with class-dependent connectivity

Regions are grouped into equally sized communities. Each community shares
one latent source per subject (random-frequency sinusoid plus white
component, standardized), every region mixes its community source with
independent noise. Subjects of class k have the mixing weights of one
community scaled by ``1 - shift * k / (K - 1)``, which weakens the
within-community correlations of that block.

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
import logging

import numpy as np

from bnft import ConfigurationError, InputError
from bnft.connectome import BoldRecording, Cohort
from bnft.utils import make_rng

FREQ_RANGE = (0.02, 0.12)
WHITE_SHARE = 0.5


class SynthConfig(object):
    """
    :type labels: list[str]
    """

    def __init__(self, regions=16, timepoints=120, n_per_class=60, n_communities=4,
                 inter_class_shift=0.8, noise_std=0.2, seed=0, labels=("NC", "AD"), perturbed_community=0):
        self.regions = int(regions)
        self.timepoints = int(timepoints)
        self.n_per_class = int(n_per_class)
        self.n_communities = int(n_communities)
        self.inter_class_shift = float(inter_class_shift)
        self.noise_std = float(noise_std)
        self.seed = int(seed)
        self.labels = [str(label) for label in labels]
        self.perturbed_community = int(perturbed_community)
        self.validate()

    @classmethod
    def from_settings(cls, settings):
        """
        :type settings: dict
        :rtype: SynthConfig
        """
        return cls(regions=settings.get("regions", 16),
                   timepoints=settings.get("timepoints", 120),
                   n_per_class=settings.get("n-per-class", 60),
                   n_communities=settings.get("communities", 4),
                   inter_class_shift=settings.get("inter-class-shift", 0.8),
                   noise_std=settings.get("noise-std", 0.2),
                   seed=settings.get("seed", 0),
                   labels=settings.get("labels", ["NC", "AD"]),
                   perturbed_community=settings.get("perturbed-community", 0))

    def validate(self):
        if self.n_communities < 1 or self.regions % self.n_communities:
            raise ConfigurationError("Regions count %s is not divisible by communities count %s"
                                     % (self.regions, self.n_communities))
        if self.regions < 2 or self.timepoints < 3:
            raise ConfigurationError("Need at least 2 regions and 3 timepoints")
        if not 0.0 <= self.inter_class_shift <= 1.0:
            raise ConfigurationError("inter-class-shift must lie in [0, 1], got %s" % self.inter_class_shift)
        if self.noise_std <= 0:
            raise ConfigurationError("noise-std must be positive, got %s" % self.noise_std)
        if self.n_per_class < 1:
            raise ConfigurationError("n-per-class must be positive")
        if len(self.labels) < 2 or len(set(self.labels)) != len(self.labels):
            raise ConfigurationError("Need at least two distinct labels, got %s" % self.labels)
        if not 0 <= self.perturbed_community < self.n_communities:
            raise ConfigurationError("No community #%s" % self.perturbed_community)

    def community_members(self, community):
        size = self.regions // self.n_communities
        return np.arange(community * size, (community + 1) * size)

    def class_scale(self, class_idx):
        return 1.0 - self.inter_class_shift * class_idx / (len(self.labels) - 1)

    def to_dict(self):
        return {
            "regions": self.regions,
            "timepoints": self.timepoints,
            "n-per-class": self.n_per_class,
            "communities": self.n_communities,
            "inter-class-shift": self.inter_class_shift,
            "noise-std": self.noise_std,
            "seed": self.seed,
            "labels": list(self.labels),
            "perturbed-community": self.perturbed_community,
        }


def _latent_source(rng, timepoints):
    steps = np.arange(timepoints)
    freq = rng.uniform(*FREQ_RANGE)
    phase = rng.uniform(0.0, 2 * np.pi)
    source = np.sin(2 * np.pi * freq * steps + phase) + WHITE_SHARE * rng.standard_normal(timepoints)
    source -= source.mean()
    return source / source.std()


def generate_cohort(config):
    """
    :type config: SynthConfig
    :rtype: Cohort
    """
    config.validate()
    rng = make_rng(config.seed)
    recordings = []
    communities = [config.community_members(idx) for idx in range(config.n_communities)]
    for class_idx, label in enumerate(config.labels):
        scale = config.class_scale(class_idx)
        for _ in range(config.n_per_class):
            signal = np.empty((config.regions, config.timepoints))
            for comm_idx, members in enumerate(communities):
                source = _latent_source(rng, config.timepoints)
                weight = scale if comm_idx == config.perturbed_community else 1.0
                noise = config.noise_std * rng.standard_normal((len(members), config.timepoints))
                signal[members] = weight * source + noise
            subject_id = "sub-%04d" % len(recordings)
            recordings.append(BoldRecording(subject_id, signal, label))

    logging.getLogger(__name__).debug("Generated %s subjects, labels %s", len(recordings), config.labels)
    return Cohort(recordings)


def community_strength(matrix, config):
    """
    Mean off-diagonal correlation inside the perturbed community

    :type matrix: bnft.connectome.ConnectivityMatrix
    :type config: SynthConfig
    :rtype: float
    """
    members = config.community_members(config.perturbed_community)
    block = matrix.values[np.ix_(members, members)]
    count = len(members)
    return float((block.sum() - np.trace(block)) / (count * (count - 1)))


class ThresholdOracle(object):
    """
    Threshold rule on community_strength, cut at the midpoint of the two
    class means seen in training data
    """

    def __init__(self, config, positive, negative):
        self.config = config
        self.positive = positive
        self.negative = negative
        self.threshold = None
        self.positive_below = True

    def fit(self, matrices):
        pos = [community_strength(mtx, self.config) for mtx in matrices if mtx.label == self.positive]
        neg = [community_strength(mtx, self.config) for mtx in matrices if mtx.label == self.negative]
        if not pos or not neg:
            raise InputError("Threshold rule needs both %s and %s subjects" % (self.positive, self.negative))
        self.threshold = (np.mean(pos) + np.mean(neg)) / 2.0
        self.positive_below = np.mean(pos) < np.mean(neg)
        return self

    def predict(self, matrices):
        labels = []
        for mtx in matrices:
            below = community_strength(mtx, self.config) < self.threshold
            labels.append(self.positive if below == self.positive_below else self.negative)
        return labels

    def accuracy(self, matrices):
        predicted = self.predict(matrices)
        hits = sum(1 for mtx, label in zip(matrices, predicted) if mtx.label == label)
        return hits / float(len(matrices))
