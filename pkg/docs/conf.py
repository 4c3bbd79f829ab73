# -*- coding: utf-8 -*-
#
# satclassifier documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import datetime
import importlib
import os
import sys
from configparser import ConfigParser

conf = ConfigParser()

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath('../'))

# -- General configuration ------------------------------------------------
conf.read([os.path.join(os.path.dirname(__file__), '..', 'setup.cfg')])
setup_cfg = dict(conf.items('metadata'))

needs_sphinx = '3.0'

on_rtd = os.environ.get('READTHEDOCS', None) == 'True'

# Configuration for intersphinx: refer to the Python standard library.
intersphinx_mapping = {
    'python': ('https://docs.python.org/3/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'astropy': ('https://docs.astropy.org/en/stable/', None),
    }

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.mathjax',
    ]

source_suffix = '.rst'
master_doc = 'index'
exclude_patterns = ['_build']

# General information about the project
project = setup_cfg['package_name']
author = setup_cfg['author']
copyright = '{0}, {1}'.format(datetime.datetime.now().year, author)

package = importlib.import_module(setup_cfg['package_name'])
version = package.__version__.split('-', 1)[0]
release = package.__version__

# The reST default role (used for this markup: `text`) to use for all
# documents.
default_role = 'obj'

napoleon_google_docstring = False
napoleon_use_rtype = False

# Class documentation should contain *both* the class docstring and
# the __init__ docstring
autoclass_content = "both"

pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
html_last_updated_fmt = '%b %d, %Y'
html_sidebars = {'**': ['globaltoc.html', 'relations.html', 'searchbox.html']}
html_domain_indices = True
html_use_index = True
htmlhelp_basename = 'satclassifierdoc'

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('index', 'satclassifier', u'satclassifier Documentation', [author], 1)
]
man_show_urls = True
