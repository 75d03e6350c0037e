# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.
#
# This file does only contain a selection of the most common options. For a
# full list see the documentation:
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('..'))


# -- Project information -----------------------------------------------------

project = 'L2T-Reflect'
copyright = '2025, L2T-Reflect contributors'
author = 'L2T-Reflect contributors'

# The short X.Y version
version = '0.1'
# The full version, including alpha/beta/rc tags
release = '0.1.0'


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.todo',
]

templates_path = ['_templates']

source_suffix = '.rst'

# The master toctree document.
master_doc = 'index'

language = None

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

pygments_style = 'sphinx'


# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'

html_static_path = ['_static']


# -- Options for HTMLHelp output ---------------------------------------------

htmlhelp_basename = 'L2TReflectdoc'


# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'l2t', 'L2T-Reflect Documentation',
     [author], 1)
]


# -- Options for todo extension ----------------------------------------------

todo_include_todos = True
