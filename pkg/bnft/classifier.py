"""
Latent readout, linear SVM and diagnosis metrics

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

from bnft import ConfigurationError, DimensionError, InputError
from bnft.autodiff import Tensor
from bnft.connectome import ConnectivityMatrix
from bnft.objectives import classification_head
from bnft.utils import make_rng, JSONDumpable

METRICS = ("acc", "sen", "spe", "f1")


class LatentFeature(object):
    def __init__(self, vector, subject_id, label):
        self.vector = np.asarray(vector, dtype=np.float64)
        self.subject_id = subject_id
        self.label = label

    def __repr__(self):
        return "LatentFeature(%s, %s, dim=%s)" % (self.subject_id, self.label, self.vector.shape[0])


def extract_latents(matrices, bundle):
    """
    Readout for many subjects in one stacked pass, no masking

    :type matrices: list[ConnectivityMatrix]
    :type bundle: bnft.trainer.ModelBundle
    :rtype: list[LatentFeature]
    """
    matrices = list(matrices)
    if not matrices:
        return []
    for mtx in matrices:
        if mtx.regions != bundle.regions:
            raise DimensionError("Subject %s has %s regions, model expects %s"
                                 % (mtx.subject_id, mtx.regions, bundle.regions))
    values = np.stack([mtx.values for mtx in matrices])
    embedded = classification_head(bundle.tokens(Tensor(values)), bundle.heads).numpy()
    embedded = embedded.reshape(len(matrices), -1)
    return [LatentFeature(vector, mtx.subject_id, mtx.label) for vector, mtx in zip(embedded, matrices)]


def extract_latent(matrix, bundle):
    """
    :type matrix: ConnectivityMatrix
    :rtype: LatentFeature
    """
    return extract_latents([matrix], bundle)[0]


def _feature_matrix(features):
    rows = [item.vector if isinstance(item, LatentFeature) else np.asarray(item, dtype=np.float64)
            for item in features]
    if not rows:
        raise InputError("No features given")
    return np.vstack(rows)


class SvmModel(object):
    """
    Linear decision rule sign(w.x + b), +1 meaning the positive label
    """

    def __init__(self, weights, bias, positive, negative, C=1.0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.positive = positive
        self.negative = negative
        self.C = C

    def decision_function(self, features):
        matrix = _feature_matrix(features)
        if matrix.shape[1] != self.weights.shape[0]:
            raise DimensionError("Features are %s wide, model expects %s" % (matrix.shape[1], self.weights.shape[0]))
        return matrix.dot(self.weights) + self.bias

    def predict(self, features):
        return [self.positive if score > 0 else self.negative for score in self.decision_function(features)]


def _objective(weights, matrix, signs, lam):
    hinge = np.maximum(0.0, 1.0 - signs * matrix.dot(weights))
    return 0.5 * lam * weights.dot(weights) + hinge.mean()


def svm_train(features, labels, C=1.0, epochs=200, seed=0, positive=None, batch_size=32):
    """
    Primal sub-gradient descent on L2-regularized hinge loss, Pegasos style:
    step 1/(lambda t) with lambda = 1/(C n), then projection onto the ball
    of radius 1/sqrt(lambda). The bias rides along as a constant feature.
    Mini-batches come from a seeded shuffle; the iterate with the lowest
    objective seen at an epoch end is returned.

    :param positive: label mapped to +1, the disease label; defaults to the
                     last label in sorted order
    :type features: list[LatentFeature] or list[numpy.ndarray]
    :type labels: list
    :rtype: SvmModel
    """
    matrix = _feature_matrix(features)
    labels = list(labels)
    if len(labels) != matrix.shape[0]:
        raise InputError("Got %s features and %s labels" % (matrix.shape[0], len(labels)))
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise InputError("SVM needs exactly two classes, got %s" % classes)
    if C <= 0 or epochs < 1:
        raise ConfigurationError("SVM needs C > 0 and at least one epoch")
    if positive is None:
        positive = classes[-1]
    if positive not in classes:
        raise InputError("Positive label %s is not among %s" % (positive, classes))
    negative = classes[0] if classes[1] == positive else classes[1]

    signs = np.array([1.0 if label == positive else -1.0 for label in labels])
    count = matrix.shape[0]
    matrix = np.hstack([matrix, np.ones((count, 1))])
    lam = 1.0 / (C * count)
    radius = 1.0 / np.sqrt(lam)
    rng = make_rng(seed)

    weights = np.zeros(matrix.shape[1])
    best = (_objective(weights, matrix, signs, lam), weights.copy())
    step = 0
    for _ in range(epochs):
        order = rng.permutation(count)
        for start in range(0, count, batch_size):
            rows = matrix[order[start:start + batch_size]]
            targets = signs[order[start:start + batch_size]]
            step += 1
            active = targets * rows.dot(weights) < 1.0
            grad = lam * weights - targets[active].dot(rows[active]) / len(targets)
            weights = weights - grad / (lam * step)
            norm = np.linalg.norm(weights)
            if norm > radius:
                weights *= radius / norm
        value = _objective(weights, matrix, signs, lam)
        if value < best[0]:
            best = (value, weights.copy())

    logging.getLogger(__name__).debug("SVM trained on %s samples, objective %.6f", count, best[0])
    return SvmModel(best[1][:-1], best[1][-1], positive, negative, C)


class EvalReport(JSONDumpable):
    """
    Confusion counts with the positive class as the disease label
    """

    def __init__(self, tp, fp, tn, fn, runs=None):
        self.tp, self.fp, self.tn, self.fn = int(tp), int(fp), int(tn), int(fn)
        if self.total == 0:
            raise InputError("Evaluation set is empty")
        self.runs = runs or []
        self.metrics = self.compute(self.tp, self.fp, self.tn, self.fn)

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @staticmethod
    def compute(tp, fp, tn, fn):
        def ratio(num, denom):
            return num / float(denom) if denom else 0.0

        return {
            "acc": ratio(tp + tn, tp + tn + fp + fn),
            "sen": ratio(tp, tp + fn),
            "spe": ratio(tn, tn + fp),
            "f1": ratio(2 * tp, 2 * tp + fp + fn),
        }

    @property
    def acc(self):
        return self.metrics["acc"]

    @property
    def sen(self):
        return self.metrics["sen"]

    @property
    def spe(self):
        return self.metrics["spe"]

    @property
    def f1(self):
        return self.metrics["f1"]

    def to_dict(self):
        result = {"confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}}
        result.update(self.metrics)
        if self.runs:
            result["runs"] = [run.to_dict() for run in self.runs]
        return result

    def table(self, title=""):
        return render_table([(title, self)])


class AveragedReport(EvalReport):
    """
    Mean of each metric over runs; confusion counts are summed
    """

    def __init__(self, runs):
        runs = list(runs)
        if not runs:
            raise InputError("Nothing to average")
        super(AveragedReport, self).__init__(sum(run.tp for run in runs), sum(run.fp for run in runs),
                                             sum(run.tn for run in runs), sum(run.fn for run in runs), runs)
        self.metrics = {key: float(np.mean([run.metrics[key] for run in runs])) for key in METRICS}


def render_table(rows):
    """
    Aligned plain text with ACC, SEN, SPE, F1-score columns in percent

    :type rows: list[(str, EvalReport)]
    :rtype: str
    """
    header = ("", "ACC", "SEN", "SPE", "F1-score")
    lines = [header]
    for title, report in rows:
        lines.append((title,) + tuple("%.2f" % (100.0 * report.metrics[key]) for key in METRICS))
    widths = [max(len(line[idx]) for line in lines) for idx in range(len(header))]
    text = []
    for line in lines:
        cells = [line[0].ljust(widths[0])] + [cell.rjust(width) for cell, width in zip(line[1:], widths[1:])]
        text.append("  ".join(cells).rstrip())
    return "\n".join(text)


def evaluate(model, features, labels):
    """
    :type model: SvmModel
    :rtype: EvalReport
    """
    labels = list(labels)
    if not labels:
        raise InputError("Cannot evaluate on an empty set")
    predicted = model.predict(features)
    if len(predicted) != len(labels):
        raise InputError("Got %s features and %s labels" % (len(predicted), len(labels)))
    tp = fp = tn = fn = 0
    for truth, guess in zip(labels, predicted):
        if guess == model.positive:
            if truth == model.positive:
                tp += 1
            else:
                fp += 1
        else:
            if truth == model.positive:
                fn += 1
            else:
                tn += 1
    return EvalReport(tp, fp, tn, fn)


def repeat_and_average(pipeline, seeds):
    """
    Run pipeline(seed) once per seed and average the reports

    :type pipeline: callable
    :type seeds: list[int]
    :rtype: AveragedReport
    """
    log = logging.getLogger(__name__)
    runs = []
    for seed in seeds:
        report = pipeline(seed)
        log.info("Run with seed %s: ACC=%.4f SEN=%.4f SPE=%.4f F1=%.4f",
                 seed, report.acc, report.sen, report.spe, report.f1)
        runs.append(report)
    return AveragedReport(runs)
