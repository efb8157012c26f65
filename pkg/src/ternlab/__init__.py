"""Laboratory for ternary square systems: exact nested-square geometry,
subharmonic envelopes and their growth certificates, dbar-corrected entire
approximants, translation statistics, and Nevanlinna characteristics."""

__version__ = "0.1.0"
