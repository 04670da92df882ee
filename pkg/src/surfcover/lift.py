"""Lift planned chart paths to posed 3D end-effector waypoints and twists.

Each chart point maps to a surface point plus an offset of `delta` meters
along the surface normal (the arm's control point sits that far off the
contact point). The tool Z axis points against the normal; on top of that
tilt the tool spins about its own Z by an angle that integrates the path's
turn rate, so the wiper stays aligned with the direction of travel.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .baselines import UVPath
from .mesh import TriangleMesh
from .parameterize import UVChart, surface_point
from .rotations import (
    quat_between,
    quat_conjugate,
    quat_from_rotvec,
    quat_multiply,
    quat_rotate,
    quat_to_rotvec,
)

Z_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass
class PosedWaypoint:
    position: np.ndarray  # (3,) meters, control point
    orientation: np.ndarray  # (4,) unit quaternion wxyz
    normal: np.ndarray  # (3,) surface normal at the contact point
    gamma: float  # tool-Z spin angle, radians


@dataclass
class TwistSample:
    v_linear: np.ndarray  # (3,) m/s
    omega_vec: np.ndarray  # (3,) rad/s, axis scaled by angle/dt
    dt: float
    delta: float


def tool_orientation(normal, gamma: float) -> np.ndarray:
    """Orientation whose Z axis opposes `normal`, spun by `gamma` about it.

    The tilt is the minimal rotation taking world +Z onto -normal; for a
    surface facing straight up this is a 180-degree flip about world X.
    """
    tilt = quat_between(Z_AXIS, -np.asarray(normal, dtype=np.float64))
    spin = quat_from_rotvec([0.0, 0.0, gamma])
    return quat_multiply(tilt, spin)


def _wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    return -((-x + math.pi) % (2.0 * math.pi) - math.pi)


def lift_path(
    path: UVPath,
    chart: UVChart,
    mesh: TriangleMesh,
    delta: float = 0.02,
    dt: float = 0.1,
    gamma0: float = 0.0,
) -> list[PosedWaypoint]:
    """Posed waypoints for every path point.

    gamma starts at `gamma0` and accumulates the wrapped heading change
    between consecutive points, i.e. its rate equals the chart-plane turn
    rate; a straight segment keeps gamma constant.

    Raises:
        ValueError: a path point falls outside the chart, or delta < 0.
    """
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    waypoints = []
    gamma = float(gamma0)
    for k, (uv, heading) in enumerate(zip(path.points, path.headings)):
        if k > 0:
            gamma += _wrap_angle(float(path.headings[k] - path.headings[k - 1]))
        point, normal = surface_point(chart, mesh, uv[0], uv[1])
        nn = np.linalg.norm(normal)
        if nn < 1e-12:
            raise ValueError(f"zero-length normal at path point {k}")
        waypoints.append(
            PosedWaypoint(
                position=point + delta * normal,
                orientation=tool_orientation(normal, gamma),
                normal=normal,
                gamma=gamma,
            )
        )
    return waypoints


def twists(waypoints: list[PosedWaypoint], dt: float, delta: float = 0.0) -> list[TwistSample]:
    """Per-segment end-effector twists between consecutive waypoints.

    The linear velocity is the control-point displacement over dt, which
    equals the contact-point velocity plus the velocity of the rotating
    normal offset. The angular velocity is the relative world-frame
    rotation's axis scaled by angle/dt, so |omega| * dt reproduces the
    rotation angle between the two orientations.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if len(waypoints) < 2:
        raise ValueError("need at least 2 waypoints")
    out = []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        v_linear = (b.position - a.position) / dt
        rel = quat_multiply(b.orientation, quat_conjugate(a.orientation))
        omega_vec = quat_to_rotvec(rel) / dt
        out.append(TwistSample(v_linear=v_linear, omega_vec=omega_vec, dt=dt, delta=delta))
    return out


def integrate_twists(position0, orientation0, twist_list: list[TwistSample]):
    """Re-synthesize the waypoint sequence from a start pose and twists.

    Returns (positions, orientations) arrays of length len(twist_list)+1.
    """
    positions = [np.asarray(position0, dtype=np.float64)]
    orientations = [np.asarray(orientation0, dtype=np.float64)]
    for tw in twist_list:
        positions.append(positions[-1] + tw.v_linear * tw.dt)
        step = quat_from_rotvec(tw.omega_vec * tw.dt)
        orientations.append(quat_multiply(step, orientations[-1]))
    return np.asarray(positions), np.asarray(orientations)


def save_waypoints_csv(waypoints: list[PosedWaypoint], path, config_hash: str | None = None) -> None:
    """Waypoints as CSV; positions in meters, quaternions wxyz, gamma radians."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# units: x,y,z meters; qw,qx,qy,qz unit quaternion (wxyz); gamma radians\n")
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "qw", "qx", "qy", "qz", "gamma"])
        for wp in waypoints:
            row = list(wp.position) + list(wp.orientation) + [wp.gamma]
            writer.writerow([f"{x:.17g}" for x in row])


def load_waypoints_csv(path) -> tuple[list[PosedWaypoint], dict]:
    meta = {}
    waypoints = []
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0].startswith("#"):
                text = ",".join(row).lstrip("#").strip()
                if "=" in text:
                    key, value = text.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if row[0] == "x":
                continue
            vals = [float(x) for x in row]
            quat = np.asarray(vals[3:7])
            waypoints.append(
                PosedWaypoint(
                    position=np.asarray(vals[0:3]),
                    orientation=quat,
                    normal=-quat_rotate(quat, Z_AXIS),
                    gamma=vals[7],
                )
            )
    return waypoints, meta


def save_twists_json(twist_list: list[TwistSample], path, config_hash: str | None = None) -> None:
    """Twists as JSON; linear m/s, angular rad/s, dt seconds, delta meters."""
    doc = {
        "format_version": 1,
        "units": {"v_linear": "m/s", "omega": "rad/s", "dt": "s", "delta": "m"},
        "twists": [
            {
                "v_linear": list(tw.v_linear),
                "omega": list(tw.omega_vec),
                "dt": tw.dt,
                "delta": tw.delta,
            }
            for tw in twist_list
        ],
    }
    if config_hash:
        doc["config_hash"] = config_hash
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
