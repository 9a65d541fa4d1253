"""cxverb: complex-valued GAN speech dereverberation at configurable scale."""

__version__ = "0.4.0"
