#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# kregcore documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.mathjax',
              'sphinx.ext.autodoc',
              'sphinx.ext.githubpages']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'kregcore'
copyright = '2026, The kregcore developers'
author = 'The kregcore developers'

version = '0.1'
release = '0.1.0'

language = None
exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
html_static_path = []
htmlhelp_basename = 'kregcoredoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}
latex_documents = [
    (master_doc, 'kregcore.tex', 'kregcore Documentation',
     author, 'manual'),
]

man_pages = [
    (master_doc, 'kregcore', 'kregcore Documentation', [author], 1)
]
