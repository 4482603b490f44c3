# Configuration file for the Sphinx documentation builder.
#
# This file does only contain a selection of the most common options. For a
# full list see the documentation:
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

import datetime
import os
import sys


DOCS_PATH = os.path.dirname(os.path.abspath(__file__))
PROJECT_PATH = os.path.dirname(DOCS_PATH)

# Import mindkit from the source tree when it is not installed.
sys.path.insert(0, PROJECT_PATH)


# -- Project information -----------------------------------------------------

project = "mindkit"
author = "mindkit contributors"
copyright = f"2024–{str(datetime.datetime.now().year)}, {author}"


# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.mathjax",
]

autodoc_member_order = "bysource"

source_suffix = ".rst"

master_doc = "index"

language = "en"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

# Add any paths that contain templates here, relative to this directory.
templates_path = ["_templates"]


# -- Options for HTML output -------------------------------------------------

html_show_sourcelink = False

html_theme = "alabaster"

html_last_updated_fmt = ""
