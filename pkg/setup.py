"""
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
import sys

from setuptools import setup
from setuptools.command.install import install

import bnft


class InstallWithHook(install, object):
    """
    Command adding post-install hook to setup
    """

    def run(self):
        install.run(self)
        self.__hook()

    def __hook(self):
        dirname = bnft.get_configs_dir()
        sys.stdout.write("[%s] Creating %s\n" % (bnft.VERSION, dirname))
        if not os.path.exists(dirname):
            os.makedirs(dirname)


setup(
    name="bnft",
    version=bnft.VERSION,
    description='Adapter fine-tuning of brain network encoders for diagnosis',

    install_requires=['pyyaml', 'psutil', 'colorlog', 'numpy', 'matplotlib', 'nose'],
    packages=['bnft', 'bnft.modules'],
    entry_points={
        'console_scripts': [
            'bnft=bnft.cli:main',
        ],
    },
    include_package_data=True,
    package_data={
        "bnft": ["10-base.json"],
    },
    cmdclass=dict(install=InstallWithHook)
)
