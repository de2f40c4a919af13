"""
Synthetic cohort generation command

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
import os

from bnft.connectome import write_cohort
from bnft.engine import CommandModule
from bnft.synthdata import SynthConfig, generate_cohort


class CohortGenerator(CommandModule):
    """
    Writes a labeled synthetic cohort in the dataset directory format

    :type synth: SynthConfig
    """

    def __init__(self):
        super(CohortGenerator, self).__init__()
        self.synth = None
        self.cohort = None
        self.out_dir = None

    def prepare(self):
        params = dict(self.settings)
        params["seed"] = self.seed
        self.synth = SynthConfig.from_settings(params)
        self.out_dir = self.get_setting("out") or os.path.join(self.engine.artifacts_dir, "dataset")
        self.log.info("Generating %s subjects per class %s, %s regions x %s timepoints",
                      self.synth.n_per_class, self.synth.labels, self.synth.regions, self.synth.timepoints)

    def check(self):
        self.cohort = generate_cohort(self.synth)
        return True

    def post_process(self):
        if self.cohort is None:
            return
        manifest = write_cohort(self.cohort, self.out_dir, extra=self.synth.to_dict())
        self.engine.register_output(self.out_dir)
        self.log.info("Dataset written: %s", manifest)
