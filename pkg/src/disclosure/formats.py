"""Reading and writing traces, profiles and estimates.

CSV files start with ``#`` metadata lines (``# key=value``) followed by a
header row and one data row per round (traces) or per recipient (matrices).
JSON files store matrices column-major: a list of columns, each a list.
Integer counts round-trip exactly; floats are written with ``repr`` so they
round-trip bit-for-bit too.
"""

import csv
import io
import json
from pathlib import Path

import numpy as np

from .core import EstimatedProfiles, ObservationPair, SenderProfiles


class FormatError(ValueError):
    pass


def _fmt(path, fmt):
    if fmt is not None:
        return fmt
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix not in ("csv", "json"):
        raise FormatError(f"{path}: cannot infer format from suffix, pass csv or json")
    return suffix


def _columns(m):
    return np.asarray(m).T.tolist()


def _from_columns(cols, dtype, where):
    try:
        return np.array(cols, dtype=dtype).T
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def _write_csv(meta, header, rows):
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_csv(text, where):
    meta, lines = {}, []
    for n, line in enumerate(text.splitlines(), 1):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise FormatError(f"{where}:{n}: malformed metadata line {line!r}")
            meta[key.strip()] = value.strip()
        elif line.strip():
            lines.append((n, line))
    if not lines:
        raise FormatError(f"{where}: no header row")
    rows = list(csv.reader(line for _, line in lines))
    header, body = rows[0], rows[1:]
    for (n, _), row in zip(lines[1:], body):
        if len(row) != len(header):
            raise FormatError(f"{where}:{n}: expected {len(header)} fields, got {len(row)}")
    return meta, header, body


def _int_table(body, where):
    try:
        return np.array([[int(v) for v in row] for row in body], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def _float_table(body, where):
    try:
        return np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


# -- observations -------------------------------------------------------------

def dumps_observations(obs: ObservationPair, fmt="csv", seed=None) -> str:
    meta = {"N": obs.n_users, "t": obs.threshold, "rho": obs.rounds, "seed": seed}
    if fmt == "json":
        return json.dumps({**meta, "x": _columns(obs.x), "y": _columns(obs.y)}) + "\n"
    n = obs.n_users
    header = [f"x{i}" for i in range(n)] + [f"y{j}" for j in range(n)]
    rows = np.hstack([obs.x, obs.y]).tolist()
    return _write_csv({k: ("" if v is None else v) for k, v in meta.items()}, header, rows)


def loads_observations(text: str, fmt="csv", where="<string>"):
    """Parse a trace; returns ``(ObservationPair, metadata dict)``."""
    if fmt == "json":
        try:
            doc = json.loads(text)
            x = _from_columns(doc["x"], np.int64, where)
            y = _from_columns(doc["y"], np.int64, where)
        except (json.JSONDecodeError, KeyError) as exc:
            raise FormatError(f"{where}: {exc}") from None
        meta = {k: doc.get(k) for k in ("N", "t", "rho", "seed")}
    else:
        meta, header, body = _read_csv(text, where)
        data = _int_table(body, where)
        if len(header) % 2 or data.ndim != 2 or data.shape[0] == 0:
            raise FormatError(f"{where}: expected 2N columns x0..,y0.. and at least one round")
        n = len(header) // 2
        x, y = data[:, :n], data[:, n:]
        meta = {k: (int(v) if v else None) for k, v in meta.items()}
    obs = ObservationPair(x, y)
    for key, actual in (("N", obs.n_users), ("t", obs.threshold), ("rho", obs.rounds)):
        if meta.get(key) is not None and int(meta[key]) != actual:
            raise FormatError(f"{where}: header says {key}={meta[key]} but data has {actual}")
    return obs, meta


# -- profiles -----------------------------------------------------------------

def dumps_profiles(profiles: SenderProfiles, fmt="csv") -> str:
    probs = profiles.probs
    if fmt == "json":
        return json.dumps({"N": profiles.n_users, "probs": _columns(probs)}) + "\n"
    header = [f"sender{i}" for i in range(profiles.n_users)]
    return _write_csv({"N": profiles.n_users}, header, [[repr(v) for v in row] for row in probs.tolist()])


def loads_profiles(text: str, fmt="csv", where="<string>") -> SenderProfiles:
    if fmt == "json":
        try:
            probs = _from_columns(json.loads(text)["probs"], np.float64, where)
        except (json.JSONDecodeError, KeyError) as exc:
            raise FormatError(f"{where}: {exc}") from None
    else:
        _, _, body = _read_csv(text, where)
        probs = _float_table(body, where)
    return SenderProfiles(probs)


# -- estimates ----------------------------------------------------------------

def dumps_estimate(est: EstimatedProfiles, fmt="csv", seed=None) -> str:
    undefined = sorted(est.undefined_users)
    if fmt == "json":
        cols = [[None if np.isnan(v) else v for v in col] for col in _columns(est.est)]
        doc = {"attack": est.attack_name, "seed": seed, "N": est.n_users,
               "undefined_users": undefined, "est": cols}
        return json.dumps(doc) + "\n"
    meta = {"attack": est.attack_name, "seed": "" if seed is None else seed, "N": est.n_users,
            "undefined_users": " ".join(map(str, undefined))}
    header = [f"sender{i}" for i in range(est.n_users)]
    return _write_csv(meta, header, [[repr(v) for v in row] for row in est.est.tolist()])


def loads_estimate(text: str, fmt="csv", where="<string>"):
    """Parse an estimate file; returns ``(EstimatedProfiles, seed)``."""
    if fmt == "json":
        try:
            doc = json.loads(text)
            cols = [[np.nan if v is None else v for v in col] for col in doc["est"]]
            est = _from_columns(cols, np.float64, where)
            return EstimatedProfiles(est, doc["attack"], doc["undefined_users"]), doc.get("seed")
        except (json.JSONDecodeError, KeyError) as exc:
            raise FormatError(f"{where}: {exc}") from None
    meta, _, body = _read_csv(text, where)
    undefined = [int(v) for v in meta.get("undefined_users", "").split()]
    seed = int(meta["seed"]) if meta.get("seed") else None
    return EstimatedProfiles(_float_table(body, where), meta.get("attack", ""), undefined), seed


def write_text(path, text):
    Path(path).write_text(text, encoding="utf-8")


def read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from None


def save_observations(obs, path, fmt=None, seed=None):
    write_text(path, dumps_observations(obs, _fmt(path, fmt), seed=seed))


def load_observations(path, fmt=None):
    fmt = _fmt(path, fmt)
    return loads_observations(read_text(path), fmt, where=str(path))


def save_profiles(profiles, path, fmt=None):
    write_text(path, dumps_profiles(profiles, _fmt(path, fmt)))


def load_profiles(path, fmt=None):
    fmt = _fmt(path, fmt)
    return loads_profiles(read_text(path), fmt, where=str(path))


def save_estimate(est, path, fmt=None, seed=None):
    write_text(path, dumps_estimate(est, _fmt(path, fmt), seed=seed))


def load_estimate(path, fmt=None):
    fmt = _fmt(path, fmt)
    return loads_estimate(read_text(path), fmt, where=str(path))
