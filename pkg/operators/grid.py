"""Finitely supported functions on Z^d stored on a cubic box of side M."""
from dataclasses import dataclass
from pathlib import Path
import logging
import re

import numpy as np

from spherelab.exceptions import GridFormatError

logger = logging.getLogger(__name__)

HEADER = re.compile(
    r"^grid d=(?P<d>\d+) M=(?P<M>\d+) offset=(?P<offset>-?\d+(?:,-?\d+)*) "
    r"dtype=(?P<dtype>float64|complex128)(?: format=(?P<format>csv|raw))?$"
)
RAW_DTYPES = {'float64': '<f8', 'complex128': '<c16'}


@dataclass
class GridFunction:
    values: np.ndarray
    offset: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.dtype.kind not in 'fc':
            self.values = self.values.astype(float)
        shape = self.values.shape
        if not shape or len(set(shape)) != 1:
            raise GridFormatError(f"grid values must form a cube, got shape {shape}")
        if self.offset is None:
            self.offset = np.zeros(len(shape), dtype=np.int64)
        self.offset = np.asarray(self.offset, dtype=np.int64).reshape(-1)
        if self.offset.shape != (len(shape),):
            raise GridFormatError(f"offset must have {len(shape)} coordinates, got {self.offset.tolist()}")
        if not np.all(np.isfinite(self.values)):
            raise GridFormatError("grid values must be finite")

    @property
    def d(self):
        return self.values.ndim

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def cells(self):
        return self.values.size

    @property
    def is_real(self):
        return self.values.dtype.kind == 'f'

    # Constructors

    @classmethod
    def zeros(cls, d, M, offset=None, dtype=float):
        return cls(np.zeros((M,) * d, dtype=dtype), offset)

    @classmethod
    def delta(cls, d, at=None):
        at = np.zeros(d, dtype=np.int64) if at is None else np.asarray(at, dtype=np.int64)
        return cls(np.ones((1,) * d), at)

    @classmethod
    def indicator(cls, points):
        """Indicator of a finite point set, on its bounding cube."""
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        low = points.min(axis=0)
        side = int((points.max(axis=0) - low).max()) + 1
        grid = cls.zeros(points.shape[1], side, low)
        grid.values[tuple((points - low).T)] = 1.0
        return grid

    @classmethod
    def ball(cls, d, radius):
        """Indicator of the lattice points with ``|x| <= radius`` centred at the origin."""
        radius = int(radius)
        axis = np.arange(-radius, radius + 1)
        squares = sum(np.meshgrid(*([axis ** 2] * d), indexing='ij', sparse=True))
        return cls((squares <= radius * radius).astype(float), np.full(d, -radius))

    @classmethod
    def random(cls, d, M, rng=None, nonnegative=True, complex_values=False, offset=None):
        rng = np.random.default_rng(rng)
        values = rng.random((M,) * d) if nonnegative else rng.standard_normal((M,) * d)
        if complex_values:
            values = values + 1j * rng.standard_normal((M,) * d)
        if offset is None:
            offset = np.full(d, -(M // 2))
        return cls(values, offset)

    # Geometry

    def support(self):
        """Indices of nonzero cells in lexicographic order."""
        return np.argwhere(self.values != 0)

    def value_at(self, x):
        index = np.asarray(x, dtype=np.int64) - self.offset
        if np.any(index < 0) or np.any(index >= self.M):
            return 0.0
        return self.values[tuple(index)]

    def pad(self, width):
        if width < 0:
            raise ValueError(f"pad width must be nonnegative, got {width}")
        return GridFunction(np.pad(self.values, width), self.offset - width)

    def embed(self, M, offset):
        """Copy into a box of side ``M`` at ``offset``; the new box must contain this one."""
        offset = np.asarray(offset, dtype=np.int64)
        start = self.offset - offset
        if np.any(start < 0) or np.any(start + self.M > M):
            raise ValueError(f"box side {M} at {offset.tolist()} does not contain the grid")
        out = np.zeros((M,) * self.d, dtype=self.values.dtype)
        out[tuple(slice(s, s + self.M) for s in start)] = self.values
        return GridFunction(out, offset)

    def crop(self, M, offset):
        """Restriction to the box of side ``M`` at ``offset`` (zero outside this grid)."""
        offset = np.asarray(offset, dtype=np.int64)
        out = np.zeros((M,) * self.d, dtype=self.values.dtype)
        low = np.maximum(offset, self.offset)
        high = np.minimum(offset + M, self.offset + self.M)
        if np.all(high > low):
            target = tuple(slice(a, b) for a, b in zip(low - offset, high - offset))
            source = tuple(slice(a, b) for a, b in zip(low - self.offset, high - self.offset))
            out[target] = self.values[source]
        return GridFunction(out, offset)

    def __add__(self, other):
        if self.M != other.M or np.any(self.offset != other.offset):
            raise ValueError("grids must share box and offset")
        return GridFunction(self.values + other.values, self.offset)

    def __abs__(self):
        return GridFunction(np.abs(self.values), self.offset)

    # Serialization

    def header(self, fmt='csv'):
        dtype = 'float64' if self.is_real else 'complex128'
        offset = ','.join(str(int(o)) for o in self.offset)
        return f"grid d={self.d} M={self.M} offset={offset} dtype={dtype} format={fmt}"

    def save(self, path, fmt='csv'):
        path = Path(path)
        flat = self.values.ravel(order='C')
        if fmt == 'csv':
            with open(path, 'w') as fh:
                fh.write(self.header('csv') + '\n')
                if self.is_real:
                    np.savetxt(fh, flat, fmt='%.17g')
                else:
                    np.savetxt(fh, np.column_stack([flat.real, flat.imag]), fmt='%.17g', delimiter=',')
        elif fmt == 'raw':
            with open(path, 'wb') as fh:
                fh.write((self.header('raw') + '\n').encode())
                fh.write(flat.astype(RAW_DTYPES['float64' if self.is_real else 'complex128']).tobytes())
        else:
            raise GridFormatError(f"unknown grid format {fmt!r}; expected csv or raw")
        logger.info(f"wrote grid d={self.d} M={self.M} to {path} ({fmt})")
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path, 'rb') as fh:
            header = fh.readline().decode(errors='replace').strip()
            body = fh.read()
        match = HEADER.match(header)
        if match is None:
            raise GridFormatError(f"bad grid header in {path}: {header!r}", path=str(path))
        d, M = int(match['d']), int(match['M'])
        offset = [int(o) for o in match['offset'].split(',')]
        if len(offset) != d:
            raise GridFormatError(f"offset has {len(offset)} coordinates, expected {d}", path=str(path))
        size = M ** d
        if match['format'] == 'raw':
            flat = np.frombuffer(body, dtype=RAW_DTYPES[match['dtype']])
        else:
            rows = [line for line in body.decode().splitlines() if line.strip()]
            try:
                parsed = np.array([[float(v) for v in line.split(',')] for line in rows], dtype=float).reshape(len(rows), -1)
            except ValueError as e:
                raise GridFormatError(f"bad grid value in {path}: {e}", path=str(path))
            flat = parsed[:, 0] if match['dtype'] == 'float64' else parsed[:, 0] + 1j * parsed[:, 1]
        if flat.size != size:
            raise GridFormatError(f"grid {path} has {flat.size} values, expected {size}", path=str(path))
        return cls(flat.reshape((M,) * d).copy(), offset)
