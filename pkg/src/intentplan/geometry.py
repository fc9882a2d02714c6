"""Serial-chain kinematics, sphere decompositions, and the collision-probability bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap

_TWO_PI = 2.0 * np.pi


@njit(cache=True)
def _bisect_lambda(w2, vals, rr2, inside):
    """Per-pair bisection for the Tikhonov-path multiplier, in the eigenbasis.

    The squared distance to the ball center is sum_k w2[k] / (1 + lam d_k)^2,
    monotone decreasing in lam; 100 halvings on a bracketed interval leave a
    residual far below 1e-9.
    """
    a_n, b_n = rr2.shape
    lam = np.zeros((a_n, b_n))
    for a in range(a_n):
        for b in range(b_n):
            if inside[a, b]:
                continue
            target = rr2[a, b]
            hi = 1.0
            for _ in range(80):
                s = 0.0
                for k in range(3):
                    s += w2[a, b, k] / (1.0 + hi * vals[b, k]) ** 2
                if s <= target:
                    break
                hi *= 16.0
            lo = 0.0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                s = 0.0
                for k in range(3):
                    s += w2[a, b, k] / (1.0 + mid * vals[b, k]) ** 2
                if s > target:
                    lo = mid
                else:
                    hi = mid
            lam[a, b] = 0.5 * (lo + hi)
    return lam


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class Link:
    """One revolute link: joint axis, fixed offset to the link end, sphere template."""

    offset: np.ndarray                  # (3,) translation in the rotated frame (m)
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    limits: tuple = (-np.pi, np.pi)
    spheres: tuple = ((0.5, 0.1),)      # (fraction along offset, radius m)

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=float)
        ax = np.asarray(self.axis, dtype=float)
        if off.shape != (3,) or ax.shape != (3,):
            raise ValueError("offset and axis must be 3-vectors")
        if np.linalg.norm(ax) == 0:
            raise ValueError("axis must be nonzero")
        lo, hi = self.limits
        if lo > hi:
            raise ValueError("joint limits must satisfy lo <= hi")
        for frac, r in self.spheres:
            if r <= 0:
                raise ValueError("sphere radii must be positive")
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "axis", ax / np.linalg.norm(ax))


@dataclass(frozen=True)
class KinematicChain:
    """Serial chain of revolute links rooted at a fixed base position."""

    links: tuple
    base: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        links = tuple(self.links)
        if not links:
            raise ValueError("chain needs at least one link")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))

    @property
    def dof(self) -> int:
        return len(self.links)

    def lower_limits(self) -> np.ndarray:
        return np.array([l.limits[0] for l in self.links])

    def upper_limits(self) -> np.ndarray:
        return np.array([l.limits[1] for l in self.links])

    def clip(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower_limits(), self.upper_limits())


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,):
            raise ValueError("center must be a 3-vector")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class GaussianSphere:
    """Bounding sphere whose center is Gaussian-distributed."""

    mean: np.ndarray
    cov: np.ndarray
    radius: float

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mu.shape != (3,) or cov.shape != (3, 3):
            raise ValueError("mean must be (3,) and cov (3, 3)")
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))


def forward_kinematics(chain: KinematicChain, q: np.ndarray):
    """Frames after each link: list of (rotation (3,3), origin (3,)), base first.

    Frame i applies the joint rotation of link i then translates by its offset.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"configuration must have length {chain.dof}")
    frames = [(np.eye(3), chain.base.copy())]
    rot, org = np.eye(3), chain.base.copy()
    for link, angle in zip(chain.links, q):
        rot = rot @ rotation_about(link.axis, angle)
        org = org + rot @ link.offset
        frames.append((rot, org.copy()))
    return frames


def link_segments(chain: KinematicChain, q: np.ndarray):
    """(start, end) point pairs per link at configuration q."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"configuration must have length {chain.dof}")
    segs = []
    rot, org = np.eye(3), chain.base.copy()
    for link, angle in zip(chain.links, q):
        rot = rot @ rotation_about(link.axis, angle)
        start = org
        org = org + rot @ link.offset
        segs.append((start, org.copy()))
    return segs


def end_effector(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    return forward_kinematics(chain, q)[-1][1]


def robot_sphere_arrays(chain: KinematicChain, q: np.ndarray):
    """(centers (K, 3), radii (K,)) for batch collision queries."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"configuration must have length {chain.dof}")
    centers, radii = [], []
    rot, org = np.eye(3), chain.base
    for link, angle in zip(chain.links, q):
        rot = rot @ rotation_about(link.axis, angle)
        step = rot @ link.offset
        for frac, radius in link.spheres:
            centers.append(org + frac * step)
            radii.append(radius)
        org = org + step
    return np.array(centers), np.array(radii)


def robot_spheres(chain: KinematicChain, q: np.ndarray):
    """Template spheres mapped through the link frames; count is fixed per chain."""
    centers, radii = robot_sphere_arrays(chain, q)
    return [Sphere(center=c, radius=r) for c, r in zip(centers, radii)]


def human_spheres(joint_gaussians, limb_pairs, u_samples, radius: float):
    """Interpolated limb spheres between joint Gaussians.

    Each u in [0, 1] yields mean (1-u) mu1 + u mu2 and covariance
    (1-u)^2 S1 + u^2 S2 along every limb.
    """
    u_samples = np.asarray(u_samples, dtype=float)
    if np.any(u_samples < 0) or np.any(u_samples > 1):
        raise ValueError("u samples must lie in [0, 1]")
    out = []
    for j1, j2 in limb_pairs:
        mu1, s1 = joint_gaussians[j1]
        mu2, s2 = joint_gaussians[j2]
        mu1, mu2 = np.asarray(mu1, dtype=float), np.asarray(mu2, dtype=float)
        s1, s2 = np.asarray(s1, dtype=float), np.asarray(s2, dtype=float)
        for u in u_samples:
            out.append(
                GaussianSphere(
                    mean=(1.0 - u) * mu1 + u * mu2,
                    cov=(1.0 - u) ** 2 * s1 + u**2 * s2,
                    radius=radius,
                )
            )
    return out


# ---------------------------------------------------------------------------
# Collision probability bound
# ---------------------------------------------------------------------------

def _eig_psd(covs: np.ndarray):
    """Eigendecomposition with the 1e-12 jitter floor; rejects indefinite input."""
    vals, vecs = np.linalg.eigh(covs)
    if np.any(vals < -1e-8):
        raise ValueError("covariance is not positive semi-definite beyond jitter")
    return np.maximum(vals, 1e-12), vecs


@dataclass(frozen=True)
class PreparedObstacles:
    """Eigendecomposed Gaussian spheres, reusable across many robot poses."""

    means: np.ndarray     # (B, 3)
    vals: np.ndarray      # (B, 3) eigenvalues, floored at the jitter
    vecs: np.ndarray      # (B, 3, 3)
    radii: np.ndarray     # (B,)
    log_norm: np.ndarray  # (B,) Gaussian normalizing constant (log)


def prepare_obstacles(spheres) -> PreparedObstacles:
    means = np.array([s.mean for s in spheres])
    covs = np.array([s.cov for s in spheres])
    radii = np.array([s.radius for s in spheres])
    vals, vecs = _eig_psd(covs)
    log_norm = -0.5 * (3 * np.log(_TWO_PI) + np.log(vals).sum(axis=1))
    return PreparedObstacles(means, vals, vecs, radii, log_norm)


def prepared_bounds(
    robot_centers: np.ndarray,
    robot_radii: np.ndarray,
    prep: PreparedObstacles,
    paper_literal_bound: bool = False,
    clip: bool = True,
    return_xmax: bool = False,
    tol: float = 1e-9,
):
    """Collision-probability bounds of every robot sphere against prepared obstacles.

    The density peak over the ball of radius r1 + r2 around each robot center
    is the Gaussian mean when inside, otherwise the Tikhonov-path point on the
    ball surface found by bisection in the covariance eigenbasis, where the
    squared distance to the ball center is sum_i w_i^2 / (1 + lambda d_i)^2 in
    closed form.
    """
    b = np.atleast_2d(np.asarray(robot_centers, dtype=float))
    r1 = np.atleast_1d(np.asarray(robot_radii, dtype=float))
    mu, vals, vecs = prep.means, prep.vals, prep.vecs
    a_n, b_n = b.shape[0], mu.shape[0]

    rr = r1[:, None] + prep.radii[None, :]           # (A, B)
    delta = b[:, None, :] - mu[None, :, :]           # (A, B, 3)
    w = np.einsum("bij,abi->abj", vecs, delta)       # components in eigenbasis
    dist = np.linalg.norm(delta, axis=2)

    inside = dist <= rr
    lam = np.zeros((a_n, b_n))
    if np.any(~inside):
        w2 = w**2
        if _HAVE_NUMBA:
            lam = _bisect_lambda(w2, vals, rr**2, inside)
        else:
            d = np.broadcast_to(vals[None, :, :], (a_n, b_n, 3))

            def surf_dist_sq(lam_):
                return (w2 / (1.0 + lam_[..., None] * d) ** 2).sum(axis=2)

            lo = np.zeros((a_n, b_n))
            hi = np.full((a_n, b_n), 1.0)
            target = rr**2
            for _ in range(80):
                need = (surf_dist_sq(hi) > target) & ~inside
                if not np.any(need):
                    break
                hi[need] *= 16.0
            for chunk in (36,) + (12,) * 12:
                for _ in range(chunk):
                    mid = 0.5 * (lo + hi)
                    too_far = surf_dist_sq(mid) > target
                    lo = np.where(too_far, mid, lo)
                    hi = np.where(too_far, hi, mid)
                res = np.abs(np.sqrt(surf_dist_sq(0.5 * (lo + hi))) - rr)
                if np.all(res[~inside] < tol):
                    break
            lam = 0.5 * (lo + hi)

    scale = lam[..., None] * vals[None, :, :] / (1.0 + lam[..., None] * vals[None, :, :])
    w_opt = scale * w                                 # x_max - mu in eigenbasis
    quad = np.where(inside, 0.0, (w_opt**2 / vals[None, :, :]).sum(axis=2))
    density = np.exp(prep.log_norm[None, :] - 0.5 * quad)

    exponent = 2 if paper_literal_bound else 3
    bounds = (4.0 / 3.0) * np.pi * rr**exponent * density
    if clip:
        bounds = np.clip(bounds, 0.0, 1.0)
    if not return_xmax:
        return bounds, None
    x_max = mu[None, :, :] + np.einsum("bij,abj->abi", vecs, w_opt)
    x_max = np.where(inside[..., None], mu[None, :, :], x_max)
    return bounds, x_max


def collision_bounds(
    robot_centers: np.ndarray,
    robot_radii: np.ndarray,
    means: np.ndarray,
    covs: np.ndarray,
    radii: np.ndarray,
    paper_literal_bound: bool = False,
    tol: float = 1e-9,
    clip: bool = True,
):
    """Upper bounds on overlap probability for every robot/human sphere pair.

    Returns (bounds (A, B), x_max (A, B, 3)); see prepared_bounds for the math.
    """
    mu = np.atleast_2d(np.asarray(means, dtype=float))
    covs = np.asarray(covs, dtype=float).reshape(-1, 3, 3)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    vals, vecs = _eig_psd(covs)
    prep = PreparedObstacles(
        means=mu, vals=vals, vecs=vecs, radii=radii,
        log_norm=-0.5 * (3 * np.log(_TWO_PI) + np.log(vals).sum(axis=1)),
    )
    return prepared_bounds(
        robot_centers, robot_radii, prep,
        paper_literal_bound=paper_literal_bound, clip=clip, return_xmax=True, tol=tol,
    )


def collision_bound(
    robot: Sphere, human: GaussianSphere, paper_literal_bound: bool = False
) -> float:
    """Scalar upper bound on P(spheres overlap), clamped to [0, 1]."""
    bounds, _ = collision_bounds(
        robot.center[None], np.array([robot.radius]),
        human.mean[None], human.cov[None], np.array([human.radius]),
        paper_literal_bound=paper_literal_bound,
    )
    return float(bounds[0, 0])


def density_peak(robot: Sphere, human: GaussianSphere) -> np.ndarray:
    """x_max: the in-ball maximizer of the center density (for verification)."""
    _, x = collision_bounds(
        robot.center[None], np.array([robot.radius]),
        human.mean[None], human.cov[None], np.array([human.radius]),
    )
    return x[0, 0]


def gaussian_pdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray):
    """3D multivariate normal density at one point or a stack of points."""
    vals, vecs = _eig_psd(np.asarray(cov, dtype=float)[None])
    vals, vecs = vals[0], vecs[0]
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    w = (np.atleast_2d(x) - np.asarray(mean, dtype=float)) @ vecs
    quad = (w**2 / vals).sum(axis=1)
    log_norm = -0.5 * (3 * np.log(_TWO_PI) + np.log(vals).sum())
    out = np.exp(log_norm - 0.5 * quad)
    return float(out[0]) if single else out


def mc_collision_oracle(robot: Sphere, human: GaussianSphere, samples: int, seed) -> float:
    """Monte-Carlo overlap probability: fraction of sampled centers within r1 + r2."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    vals, vecs = _eig_psd(human.cov[None])
    root = vecs[0] @ np.diag(np.sqrt(vals[0]))
    z = rng.standard_normal((samples, 3))
    pts = human.mean + z @ root.T
    hits = np.linalg.norm(pts - robot.center, axis=1) <= (robot.radius + human.radius)
    return float(hits.mean())


def check_confidence(bound: float, delta_cl: float) -> bool:
    """Pass iff the bound stays below 1 - delta_cl."""
    if not (0 < delta_cl < 1):
        raise ValueError("confidence level must be in (0, 1)")
    return bound < 1.0 - delta_cl
