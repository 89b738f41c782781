"""Shared scene builders used across the test modules."""

import numpy as np
import pytest

from pseudoskel.sets import Curve, Graph, PointList, SetDescriptor
from pseudoskel.space import Signature

SIG11 = Signature(1, 1)
SIG21 = Signature(2, 1)
SIG20 = Signature(2, 0)


def two_point_descriptor():
    return SetDescriptor(SIG11, (PointList([[-1.0, 0.0], [1.0, 0.0]]),), label="two-point")


def hyperbola_descriptor(samples=2001, span=5.0):
    # upper hyperbola branch x2 = sqrt(x1^2 + 1)
    return SetDescriptor(
        SIG11,
        (Curve(
            func=lambda t: np.stack([t, np.sqrt(t * t + 1.0)], axis=-1),
            domain=(-span, span),
            samples=samples,
            deriv=lambda t: np.array([1.0, t / np.sqrt(t * t + 1.0)]),
        ),),
        label="hyperbola",
    )


def sine_descriptor(samples=2001):
    # graph x2 = 0.5 sin(x1) over [-pi, pi]; max slope 0.5
    return SetDescriptor(
        SIG11,
        (Graph(
            func=lambda x: 0.5 * np.sin(x),
            domain=((-np.pi, np.pi),),
            resolution=(samples,),
            grad=lambda x: 0.5 * np.cos(np.asarray(x)).reshape(-1, 1, 1),
        ),),
        label="sine",
    )


def corner_descriptor(samples=2001):
    # graph x2 = |x1| / 2: pseudo-Lipschitz 0.5, one corner at the origin
    return SetDescriptor(
        SIG11,
        (Graph(
            func=lambda x: np.abs(x) / 2.0,
            domain=((-2.0, 2.0),),
            resolution=(samples,),
        ),),
        label="corner",
    )


def cusp_curve_descriptor(samples=2401, span=6.0):
    # (t, t^2/(1+t^2), t) in signature (2, 1); exactly 1-pseudo-Lipschitz
    def f(t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, t * t / (1.0 + t * t), t], axis=-1)

    def df(t):
        return np.array([1.0, 2.0 * t / (1.0 + t * t) ** 2, 1.0])

    return SetDescriptor(
        SIG21,
        (Curve(func=f, domain=(-span, span), samples=samples, deriv=df),),
        label="sharpness-curve",
    )


def segment_descriptor():
    # the non-acausal example: {0} x [0, 1] in signature (1, 1)
    return SetDescriptor(
        SIG11,
        (Curve(func=lambda t: np.stack([np.zeros_like(t), t], axis=-1),
               domain=(0.0, 1.0), samples=11, extendable=False),),
        label="vertical-segment",
    )


def euclidean_two_point_descriptor():
    return SetDescriptor(SIG20, (PointList([[-1.0, 0.0], [1.0, 0.0]]),), label="euclid-two-point")


def euclidean_three_point_descriptor():
    return SetDescriptor(
        SIG20,
        (PointList([[0.0, 0.0], [2.0, 0.0], [1.0, 1.5]]),),
        label="euclid-three-point",
    )


@pytest.fixture(scope="session")
def two_point():
    return two_point_descriptor()


@pytest.fixture(scope="session")
def hyperbola():
    return hyperbola_descriptor()


@pytest.fixture(scope="session")
def sine():
    return sine_descriptor()


@pytest.fixture(scope="session")
def corner():
    return corner_descriptor()


@pytest.fixture(scope="session")
def cusp_curve():
    return cusp_curve_descriptor()
