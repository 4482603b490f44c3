import dataclasses
import math
import sys
from enum import Enum
from json import JSONEncoder
from pathlib import PurePath
from typing import IO
from typing import Dict
from typing import Optional
from typing import Union

import numpy as np

from mindkit.exceptions import InputError


PathLike = Union[str, PurePath]

# Preferred data columns, in order, when reading a signal file.
DATA_COLUMNS = ("observation", "y", "value")


def jsonable(value):
    """
    Converts reports into plain JSON types.

    Dataclasses become dicts, numpy arrays and scalars become lists and
    numbers, enums become their value, and non-finite floats become ``None``.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)
        }
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class ReportEncoder(JSONEncoder):
    """
    Serializes reports to strict JSON.
    """

    def iterencode(self, o, _one_shot=False):
        return super().iterencode(jsonable(o), _one_shot)

    def default(self, obj):
        # Serialize paths as plain strings.
        if isinstance(obj, PurePath):
            return str(obj)

        # Fallback to default encoding.
        return super().default(obj)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_columns(path: PathLike) -> Dict[str, np.ndarray]:
    """
    Reads a comma-separated file with a header row into named columns.

    A file without a header gets the column names ``c0, c1, ...``.

    :param path: File to read.
    :rtype: Dict[str, numpy.ndarray]
    """
    with open(path, newline="") as f:
        first = f.readline().strip()
        if not first:
            raise InputError("{0} is empty.".format(path))
        fields = [x.strip() for x in first.split(",")]
        header = not all(_is_number(x) for x in fields)
        f.seek(0)
        try:
            data = np.loadtxt(f, delimiter=",", skiprows=int(header), ndmin=2)
        except ValueError as err:
            raise InputError("Cannot parse {0}: {1}".format(path, err))
    if data.shape[1] != len(fields):
        raise InputError("{0} has ragged rows.".format(path))
    names = fields if header else ["c{0}".format(i) for i in range(len(fields))]
    return {name: data[:, i] for i, name in enumerate(names)}


def read_vector(path: PathLike, column: Optional[str] = None) -> np.ndarray:
    """
    Reads the data vector of a signal file: the named column, else the first
    of ``DATA_COLUMNS`` present, else the last column.
    """
    columns = read_columns(path)
    if column is not None:
        if column not in columns:
            raise InputError("{0} has no column {1!r}.".format(path, column))
        return columns[column]
    for name in DATA_COLUMNS:
        if name in columns:
            return columns[name]
    return list(columns.values())[-1]


def read_matrix(path: PathLike) -> np.ndarray:
    """
    Reads a headerless comma-separated matrix, one row per line.
    """
    columns = read_columns(path)
    return np.column_stack(list(columns.values()))


def write_columns(columns: Dict[str, np.ndarray], out: Union[PathLike, IO, None]):
    """
    Writes equally long columns as comma-separated text with a header row.
    Integer columns are written as integers, floats with full precision.

    :param columns: Column name to values, in output order.
    :param out: Path, open text stream, or ``None`` for stdout.
    """
    arrays = [np.asarray(v) for v in columns.values()]
    if len({a.shape for a in arrays}) > 1 or any(a.ndim != 1 for a in arrays):
        raise InputError("Columns must be vectors of one length.")
    fmt = ["%d" if np.issubdtype(a.dtype, np.integer) else "%.17g" for a in arrays]
    table = np.column_stack(arrays) if arrays else np.zeros((0, 0))
    stream = sys.stdout if out is None else out
    np.savetxt(
        stream,
        table.astype(object),
        fmt=fmt,
        delimiter=",",
        header=",".join(columns),
        comments="",
    )
