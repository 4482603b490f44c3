import json
import math
import os
import tempfile
import unittest
from dataclasses import dataclass
from pathlib import Path
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal

from mindkit import settings
from mindkit import utils
from mindkit.dictionaries import IntervalVariant
from mindkit.exceptions import InputError


@dataclass
class _Report:
    name: str
    values: np.ndarray
    slack: float


class ReportEncoderTest(unittest.TestCase):
    def test_numpy_and_dataclasses(self):
        """
        Reports with numpy values, enums and dataclasses serialize to JSON.
        """
        report = _Report("x", np.array([1.0, 2.5]), np.float64(0.25))
        text = json.dumps(
            {"report": report, "variant": IntervalVariant.ALL, "n": np.int64(4)},
            cls=utils.ReportEncoder,
        )
        self.assertEqual(
            json.loads(text),
            {
                "report": {"name": "x", "values": [1.0, 2.5], "slack": 0.25},
                "variant": "all",
                "n": 4,
            },
        )

    def test_non_finite(self):
        """
        Infinite and missing values become null, keeping the output strict.
        """
        text = json.dumps(
            {"box": [-math.inf, 1.0], "nan": float("nan")}, cls=utils.ReportEncoder
        )
        self.assertEqual(json.loads(text), {"box": [None, 1.0], "nan": None})

    def test_paths(self):
        """
        Paths are written as strings.
        """
        text = json.dumps({"p": Path("a/b.csv")}, cls=utils.ReportEncoder)
        self.assertEqual(json.loads(text), {"p": "a/b.csv"})


class CsvTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def test_round_trip(self):
        """
        Written columns read back unchanged, with integer indices.
        """
        path = self.path("signal.csv")
        y = np.array([0.1, -2.0, 1.0 / 3.0])
        utils.write_columns({"index": np.arange(1, 4), "observation": y}, path)
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "index,observation")
        self.assertTrue(lines[1].startswith("1,"))
        columns = utils.read_columns(path)
        assert_array_equal(columns["index"], [1, 2, 3])
        assert_allclose(columns["observation"], y, rtol=0, atol=0)

    def test_read_vector_preference(self):
        """
        The observation column wins over others; without it the last column
        is used.
        """
        path = self.path("data.csv")
        with open(path, "w") as f:
            f.write("index,truth,observation\n1,0,5\n2,0,6\n")
        assert_array_equal(utils.read_vector(path), [5.0, 6.0])
        assert_array_equal(utils.read_vector(path, "truth"), [0.0, 0.0])
        with self.assertRaises(InputError):
            utils.read_vector(path, "missing")
        with open(path, "w") as f:
            f.write("a,b\n1,2\n3,4\n")
        assert_array_equal(utils.read_vector(path), [2.0, 4.0])

    def test_headerless_matrix(self):
        """
        A file without a header reads as a matrix.
        """
        path = self.path("design.csv")
        with open(path, "w") as f:
            f.write("1,2,3\n4,5,6\n")
        assert_array_equal(utils.read_matrix(path), [[1, 2, 3], [4, 5, 6]])
        self.assertEqual(list(utils.read_columns(path)), ["c0", "c1", "c2"])

    def test_bad_files(self):
        """
        Empty and unparsable files are input errors.
        """
        path = self.path("bad.csv")
        with open(path, "w") as f:
            f.write("")
        with self.assertRaises(InputError):
            utils.read_columns(path)
        with open(path, "w") as f:
            f.write("a,b\n1,x\n")
        with self.assertRaises(InputError):
            utils.read_columns(path)

    def test_ragged_columns(self):
        """
        Columns of different lengths cannot be written.
        """
        with self.assertRaises(InputError):
            utils.write_columns({"a": np.ones(2), "b": np.ones(3)}, self.path("x"))


class SettingsTest(unittest.TestCase):
    def test_default(self):
        """
        Without an override the default is returned.
        """
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(settings.get("MINDKIT_PDHG_MAX_ITER"), 20000)

    def test_environment_override(self):
        """
        Environment values are coerced to the type of the default.
        """
        with mock.patch.dict(
            os.environ, {"MINDKIT_PDHG_TOL": "1e-5", "MINDKIT_MC_REPS": "250"}
        ):
            self.assertEqual(settings.get("MINDKIT_PDHG_TOL"), 1e-5)
            self.assertEqual(settings.get("MINDKIT_MC_REPS"), 250)
            self.assertIsInstance(settings.get("MINDKIT_MC_REPS"), int)
