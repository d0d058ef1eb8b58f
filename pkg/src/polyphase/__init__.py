"""Random matrices built from polynomial phases, and the exact tools used to
study their spectra: Marchenko-Pastur references, resolvent identities,
Vinogradov-type solution counting and local-law experiments."""

__version__ = "0.1.0"
