"""
Functional connectivity from regional time series, and the dataset
directory format shared by real and synthetic cohorts

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
import csv
import json
import logging
import os

import numpy as np

from bnft import DataFormatError, DegenerateInputError, InputError, DimensionError
from bnft.utils import to_json, make_rng

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


class BoldRecording(object):
    """
    One subject's regional signals, V regions by T timepoints

    :type subject_id: str
    :type signal: numpy.ndarray
    :type label: str
    """

    def __init__(self, subject_id, signal, label):
        self.subject_id = str(subject_id)
        self.signal = np.array(signal, dtype=np.float64)
        self.label = str(label)
        self.validate()

    @property
    def regions(self):
        return self.signal.shape[0]

    @property
    def timepoints(self):
        return self.signal.shape[1]

    def validate(self):
        if self.signal.ndim != 2:
            raise DimensionError("Subject %s: signal must be a regions x timepoints matrix, got shape %s"
                                 % (self.subject_id, self.signal.shape))
        if self.regions < 2 or self.timepoints < 3:
            raise DimensionError("Subject %s: need at least 2 regions and 3 timepoints, got %s x %s"
                                 % (self.subject_id, self.regions, self.timepoints))
        if not np.all(np.isfinite(self.signal)):
            raise DataFormatError("Subject %s: signal contains NaN or Inf" % self.subject_id)
        flat = np.flatnonzero(self.signal.var(axis=1) == 0.0)
        if flat.size:
            raise DegenerateInputError("Subject %s: region %s has zero temporal variance"
                                       % (self.subject_id, int(flat[0])))

    def __repr__(self):
        return "BoldRecording(%s, %s, %sx%s)" % (self.subject_id, self.label, self.regions, self.timepoints)


class ConnectivityMatrix(object):
    """
    V x V Pearson correlation matrix of one subject

    :type values: numpy.ndarray
    """

    def __init__(self, values, subject_id, label):
        self.values = np.array(values, dtype=np.float64)
        self.subject_id = str(subject_id)
        self.label = str(label)

    @property
    def regions(self):
        return self.values.shape[0]

    def __repr__(self):
        return "ConnectivityMatrix(%s, %s, %sx%s)" % (self.subject_id, self.label, self.regions, self.regions)


def pearson_fc(rec):
    """
    Pearson correlation between every pair of regions using population
    moments. The upper triangle is computed and mirrored, the diagonal is
    set to exactly 1 and values are clipped into [-1, 1].

    :type rec: BoldRecording
    :rtype: ConnectivityMatrix
    """
    signal = rec.signal
    stds = signal.std(axis=1)
    zero = np.flatnonzero(stds == 0.0)
    if zero.size:
        raise DegenerateInputError("Subject %s: region %s has zero temporal variance"
                                   % (rec.subject_id, int(zero[0])))

    centered = signal - signal.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / signal.shape[1]
    corr = cov / np.outer(stds, stds)

    upper = np.triu(corr, k=1)
    values = upper + upper.T
    np.fill_diagonal(values, 1.0)
    np.clip(values, -1.0, 1.0, out=values)
    return ConnectivityMatrix(values, rec.subject_id, rec.label)


def upper_triangle(matrix):
    """
    Strict upper triangle as a flat vector

    :type matrix: ConnectivityMatrix or numpy.ndarray
    :rtype: numpy.ndarray
    """
    values = matrix.values if isinstance(matrix, ConnectivityMatrix) else np.asarray(matrix)
    rows, cols = np.triu_indices(values.shape[0], k=1)
    return values[rows, cols]


class Cohort(object):
    """
    Ordered list of recordings sharing one region count

    :type recordings: list[BoldRecording]
    """

    def __init__(self, recordings):
        self.recordings = list(recordings)
        regions = set(rec.regions for rec in self.recordings)
        if len(regions) > 1:
            raise DataFormatError("Inconsistent region counts across subjects: %s" % sorted(regions))

    def __len__(self):
        return len(self.recordings)

    def __iter__(self):
        return iter(self.recordings)

    def __getitem__(self, item):
        return self.recordings[item]

    @property
    def regions(self):
        if not self.recordings:
            raise InputError("Empty cohort")
        return self.recordings[0].regions

    def labels(self):
        return [rec.label for rec in self.recordings]

    def find(self, subject_id):
        for rec in self.recordings:
            if rec.subject_id == str(subject_id):
                return rec
        raise InputError("Subject not found in cohort: %s" % subject_id)

    def connectomes(self):
        """
        :rtype: list[ConnectivityMatrix]
        """
        return [pearson_fc(rec) for rec in self.recordings]

    def select_labels(self, positive, negative):
        """
        Binary task out of a possibly larger label set, like AD vs NC

        :rtype: Cohort
        """
        chosen = [rec for rec in self.recordings if rec.label in (positive, negative)]
        if not chosen:
            raise InputError("No subjects labeled %s or %s" % (positive, negative))
        return Cohort(chosen)

    def stratified_split(self, train_fraction, seed):
        """
        Per-label shuffle and cut, both parts keep recording order within labels

        :rtype: (Cohort, Cohort)
        """
        rng = make_rng(seed)
        train, test = [], []
        for label in sorted(set(self.labels())):
            members = [rec for rec in self.recordings if rec.label == label]
            order = rng.permutation(len(members))
            cut = int(round(train_fraction * len(members)))
            train.extend(members[idx] for idx in sorted(order[:cut]))
            test.extend(members[idx] for idx in sorted(order[cut:]))
        return Cohort(train), Cohort(test)


def load_cohort(path):
    """
    Read a dataset directory: manifest.json listing subjects plus one CSV
    per subject with T rows and V comma-separated columns, no header

    :type path: str
    :rtype: Cohort
    """
    log = logging.getLogger(__name__)
    manifest_file = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_file):
        raise DataFormatError("Dataset manifest not found: %s" % manifest_file)

    with open(manifest_file) as fds:
        try:
            manifest = json.load(fds)
        except ValueError as exc:
            raise DataFormatError("Cannot parse %s: %s" % (manifest_file, exc))

    subjects = manifest.get("subjects", None) if isinstance(manifest, dict) else None
    if not isinstance(subjects, list):
        raise DataFormatError("%s: 'subjects' list is missing" % manifest_file)

    recordings = []
    regions = None
    for idx, entry in enumerate(subjects):
        for field in ("subject_id", "label", "signal"):
            if field not in entry:
                raise DataFormatError("%s: subject #%s lacks field '%s'" % (manifest_file, idx, field))
        filename = os.path.join(path, entry["signal"])
        signal = _read_signal_csv(filename)
        if regions is None:
            regions = signal.shape[1]
        elif signal.shape[1] != regions:
            raise DataFormatError("%s: subject %s has %s regions, expected %s"
                                  % (filename, entry["subject_id"], signal.shape[1], regions))
        recordings.append(BoldRecording(entry["subject_id"], signal.T, entry["label"]))

    log.debug("Loaded %s subjects with %s regions from %s", len(recordings), regions, path)
    return Cohort(recordings)


def _read_signal_csv(filename):
    if not os.path.isfile(filename):
        raise DataFormatError("Signal file not found: %s" % filename)
    rows = []
    with open(filename, "rb") as fds:
        lines = fds.read().splitlines()
    for lineno, line in enumerate(lines, start=1):
        try:
            row = next(csv.reader([line.decode("utf-8")]), [])
        except UnicodeDecodeError as exc:
            raise DataFormatError("%s:%s: not valid UTF-8 text: %s" % (filename, lineno, exc.reason))
        except csv.Error as exc:
            raise DataFormatError("%s:%s: %s" % (filename, lineno, exc))
        if not row:
            continue
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            raise DataFormatError("%s:%s: cannot parse row %r" % (filename, lineno, ",".join(row)))
        if rows and len(values) != len(rows[0]):
            raise DataFormatError("%s:%s: expected %s columns, got %s"
                                  % (filename, lineno, len(rows[0]), len(values)))
        rows.append(values)
    if not rows:
        raise DataFormatError("%s: no rows" % filename)
    return np.array(rows, dtype=np.float64)


def write_cohort(recordings, path, extra=None):
    """
    Write the dataset directory format read by load_cohort

    :type recordings: list[BoldRecording] or Cohort
    :type path: str
    :type extra: dict
    :return: manifest filename
    """
    if not os.path.isdir(path):
        os.makedirs(path)

    subjects = []
    for rec in recordings:
        fname = "%s.csv" % rec.subject_id
        with open(os.path.join(path, fname), "w") as fds:
            writer = csv.writer(fds, lineterminator="\n")
            for row in rec.signal.T:
                writer.writerow(["%.17g" % val for val in row])
        subjects.append({"subject_id": rec.subject_id, "label": rec.label, "signal": fname})

    manifest = {"format": FORMAT_VERSION, "subjects": subjects}
    if extra:
        manifest["generator"] = extra
    manifest_file = os.path.join(path, MANIFEST_NAME)
    with open(manifest_file, "w") as fds:
        fds.write(to_json(manifest))
    return manifest_file
