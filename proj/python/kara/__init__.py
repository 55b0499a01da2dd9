"""Python bindings for the kara risk-assessment core.

Arguments and results are plain Python data (dicts, lists, floats); the
native module exchanges JSON text underneath.
"""

import json

from . import _kara

__all__ = [
    "KaraError",
    "encode_one_hot",
    "similarity",
    "infer_closure",
    "calibrate",
    "solve_consensus",
    "brute_force_consensus",
    "allowed_intervals",
    "validate_pos",
    "train_reference_model",
]


class KaraError(Exception):
    """An engine error with a machine-readable code and details."""

    def __init__(self, code, message, details):
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = details


def _call(fn, *args):
    try:
        return fn(*args)
    except _kara.NativeError as e:
        payload = json.loads(str(e))
        raise KaraError(payload["code"], payload["message"], payload["details"]) from None


def _region(region):
    return "" if region is None else json.dumps(region)


def encode_one_hot(characterization, questionnaire):
    return json.loads(_call(_kara.encode_one_hot, json.dumps(characterization), json.dumps(questionnaire)))


def similarity(a, b):
    return _call(_kara.similarity, json.dumps(a), json.dumps(b))


def infer_closure(relations):
    return json.loads(_call(_kara.infer_closure, json.dumps(relations)))


def calibrate(problem):
    return json.loads(_call(_kara.calibrate, json.dumps(problem)))


def solve_consensus(weights, exact_bound=12):
    return json.loads(_call(_kara.solve_consensus, json.dumps(weights), exact_bound))


def brute_force_consensus(weights):
    return json.loads(_call(_kara.brute_force_consensus, json.dumps(weights)))


def allowed_intervals(lok, region=None):
    return [tuple(iv) for iv in json.loads(_call(_kara.allowed_intervals, lok, _region(region)))]


def validate_pos(lok, pos, region=None):
    return json.loads(_call(_kara.validate_pos, lok, pos, _region(region)))


def train_reference_model(examples):
    return json.loads(_call(_kara.train_reference_model, json.dumps(examples)))
