"""
Input and reconstructed network of one subject, as CSV and heatmaps

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

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from bnft.connectome import pearson_fc  # noqa: E402
from bnft.engine import CommandModule  # noqa: E402
from bnft.trainer import reconstruct  # noqa: E402


def write_matrix_csv(values, filename):
    """
    Comma-separated, row-major, no header
    """
    np.savetxt(filename, values, fmt="%.17g", delimiter=",")


def plot_pair(original, restored, title, filename):
    """
    Side by side heatmaps on a shared [-1, 1] color scale
    """
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.5))
    for axis, values, name in ((axes[0], original, "Input"), (axes[1], restored, "Reconstructed")):
        image = axis.imshow(values, cmap="RdBu_r", vmin=-1.0, vmax=1.0)
        axis.set_title("%s: %s" % (name, title))
        axis.set_xlabel("region")
        axis.set_ylabel("region")
        fig.colorbar(image, ax=axis, fraction=0.046)
    fig.tight_layout()
    fig.savefig(filename, dpi=100)
    plt.close(fig)


class Reconstructor(CommandModule):
    """
    Applies the reconstruction head to one subject of --dataset
    """

    def __init__(self):
        super(Reconstructor, self).__init__()
        self.matrix = None
        self.bundle = None
        self.restored = None
        self.mse = None

    def prepare(self):
        cohort = self.load_dataset()
        self.bundle = self.load_bundle()
        subject = self.get_setting("subject")
        recording = cohort.find(subject) if subject else cohort[0]
        self.matrix = pearson_fc(recording)

    def check(self):
        self.restored = reconstruct(self.matrix, self.bundle)
        self.mse = float(np.mean((self.restored - self.matrix.values) ** 2))
        self.log.info("Subject %s reconstruction MSE: %.6g", self.matrix.subject_id, self.mse)
        return True

    def post_process(self):
        if self.restored is None:
            return
        out_dir = self.get_setting("out") or self.engine.artifacts_dir
        if not os.path.isdir(out_dir):
            os.makedirs(out_dir)
        subject = self.matrix.subject_id
        files = {
            "input": os.path.join(out_dir, "%s-input.csv" % subject),
            "reconstructed": os.path.join(out_dir, "%s-reconstructed.csv" % subject),
            "heatmaps": os.path.join(out_dir, "%s-heatmaps.png" % subject),
        }
        write_matrix_csv(self.matrix.values, files["input"])
        write_matrix_csv(self.restored, files["reconstructed"])
        plot_pair(self.matrix.values, self.restored, subject, files["heatmaps"])
        for filename in files.values():
            self.engine.register_output(filename)
        self.log.info("Matrices written to %s", out_dir)
