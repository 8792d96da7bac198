#!/usr/bin/env python
# -*- coding: utf-8 -*-
# pylint: disable=C0111,W6005,W6100


import os
import re

from setuptools import setup


def get_version(*file_paths):
    """
    Extract the version string from the file at the given relative path fragments.
    """
    filename = os.path.join(os.path.dirname(__file__), *file_paths)
    with open(filename) as version_file:
        version_match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", version_file.read(), re.M)
    if version_match:
        return version_match.group(1)
    raise RuntimeError('Unable to find version string.')


def read(name):
    with open(os.path.join(os.path.dirname(__file__), name)) as handle:
        return handle.read()


def load_requirements(*requirements_paths):
    """
    Load all requirements from the specified requirements files.
    Returns a list of requirement strings.
    """
    requirements = set()
    for path in requirements_paths:
        with open(path) as handle:
            requirements.update(
                line.split('#')[0].strip() for line in handle.readlines()
                if is_requirement(line.strip())
            )
    return list(requirements)


def is_requirement(line):
    """
    Return True if the requirement line is a package requirement;
    that is, it is not blank, a comment, a URL, or an included file.
    """
    return not (line == '' or line.startswith(('-r', '#', '-e', 'git+', '-c')))


VERSION = get_version('wavegan_inversion', '__init__.py')

setup(
    name='wavegan-inversion',
    version=VERSION,
    description='Latent recovery for a WaveGAN spoken-digit generator',
    long_description=read('README.rst') + '\n\n' + read('CHANGELOG.rst'),
    license="AGPL 3.0",
    zip_safe=False,
    keywords='Django GAN inversion audio',
    classifiers=[
        'Framework :: Django',
        'Framework :: Django :: 4.2',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.11',
    ],
    packages=[
        'wavegan_inversion',
        'wavegan_inversion.management',
        'wavegan_inversion.management.commands',
    ],
    include_package_data=True,
    install_requires=load_requirements('requirements/base.in'),
)
