import os
from setuptools import setup, find_packages

# Get the directory where setup.py is located
this_directory = os.path.abspath(os.path.dirname(__file__))

# Read the long description from README.md
with open(os.path.join(this_directory, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

install_requires = [
    'termcolor>=1.1.0',
    'numpy>=1.20',
    'scipy>=1.7',
]

extras_require = {
    'tests': [
        'hypothesis>=6.0',
    ],
}

# Define entry points
entry_points = {
    'console_scripts': [
        'l2t=L2T.core:run',
    ],
}

# Define classifiers for PyPI
classifiers = [
    'Development Status :: 3 - Alpha',
    'Environment :: Console',
    'Intended Audience :: Science/Research',
    'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
    'Operating System :: OS Independent',
    'Programming Language :: Python :: 3',
    'Programming Language :: Python :: 3.8',
    'Programming Language :: Python :: 3.9',
    'Programming Language :: Python :: 3.10',
    'Programming Language :: Python :: 3.11',
    'Topic :: Scientific/Engineering :: Artificial Intelligence',
]

setup(
    name='L2T-Reflect',
    version='0.1.0',
    description='Learn which transferable factor matrix to use from recorded transfer experiences',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='GPL-3',
    python_requires='>=3.8',
    zip_safe=False,
    packages=find_packages(exclude=['tests', 'tests.*']),
    include_package_data=True,
    install_requires=install_requires,
    extras_require=extras_require,
    entry_points=entry_points,
    classifiers=classifiers,
)
