"""Numerical eps-entropy and eps-tail-entropy toolkit for one-dimensional
dynamics: interval maps, exact combinatorics, the one-dimensional
reparametrization lemma, subshifts of finite type, Cantor thickness,
weight-sequence rate bounds, and a batch experiment CLI."""

__version__ = "0.1.0"
