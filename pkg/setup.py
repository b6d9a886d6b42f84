from setuptools import setup, find_packages

setup(
    name='spar_gw',
    version='0.1.0',
    packages=find_packages(exclude=['tests']),
    package_data={'spar_gw': ['settings.ini', 'settings_internal.ini']},
    install_requires=['numpy', 'pandas', 'scipy', 'scikit-learn', 'networkx', 'joblib'],
    extras_require={'test': ['pytest'], 'docs': ['Sphinx', 'sphinx_inline_tabs']},
    entry_points={'console_scripts': ['spar-gw=spar_gw.__main__:main']},
    python_requires='>=3.9',
    license='MIT',
)
