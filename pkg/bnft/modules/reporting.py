"""
Basics of reporting capabilities

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
import json
import time
from datetime import datetime

from bnft.engine import Reporter, EpochListener


class TrainingLogReporter(Reporter, EpochListener):
    """
    Per-epoch JSON lines: epoch, l_c, l_r, combined
    """

    def __init__(self):
        super(TrainingLogReporter, self).__init__()
        self.filename = None
        self.fds = None
        self.records = 0

    def prepare(self):
        self.filename = self.parameters.get("filename", None)
        if not self.filename:
            self.filename = self.engine.create_artifact("training-log", ".jsonl")

    def epoch_finished(self, record):
        if self.fds is None:
            self.log.debug("Writing training log into %s", self.filename)
            self.fds = open(self.filename, "w")
            self.engine.register_output(self.filename)
        self.fds.write(json.dumps(record, sort_keys=True) + "\n")
        self.fds.flush()
        self.records += 1

    def finalize(self):
        if self.fds is not None:
            self.fds.close()
            self.fds = None


class FinalStatus(Reporter, EpochListener):
    """
    A reporter that logs short statistics on run end
    """

    def __init__(self):
        super(FinalStatus, self).__init__()
        self.last_epoch = None
        self.first_epoch = None
        self.start_time = None
        self.end_time = None

    def prepare(self):
        self.start_time = time.time()

    def epoch_finished(self, record):
        """
        Just store the first and latest records
        """
        if self.first_epoch is None:
            self.first_epoch = record
        self.last_epoch = record

    def post_process(self):
        """
        Log basic stats
        """
        super(FinalStatus, self).post_process()
        self.end_time = time.time()

        if self.parameters.get("run-duration", True):
            self.__report_duration()

        if self.last_epoch and self.parameters.get("summary", True):
            self.__report_losses()

        report = getattr(self.engine.command, "report", None)
        if report is not None:
            self.log.info("ACC %.2f%%, SEN %.2f%%, SPE %.2f%%, F1 %.2f%%",
                          100 * report.acc, 100 * report.sen, 100 * report.spe, 100 * report.f1)

    def __report_losses(self):
        first, last = self.first_epoch, self.last_epoch
        self.log.info("Epochs: %s, combined loss %.6f -> %.6f", last["epoch"], first["combined"], last["combined"])
        for key in ("l_c", "l_r"):
            if last[key] is not None:
                self.log.info("Final %s: %.6f", key, last[key])

    def __report_duration(self):
        date_start = datetime.fromtimestamp(int(self.start_time))
        date_end = datetime.fromtimestamp(int(self.end_time))
        self.log.info("Run duration: %s", date_end - date_start)
