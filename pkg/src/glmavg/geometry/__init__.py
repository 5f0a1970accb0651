"""Vector calculus on S¹, the flat torus T² and the unit sphere S²."""
from .calculus import (
    LaplacianKind,
    covariant_derivative,
    deformation,
    deformation_norm_sq,
    divergence,
    gradient,
    helmholtz_apply,
    helmholtz_solve,
    hodge_laplacian,
    integrate,
    jacobian,
    l2_inner,
    laplacian,
    leray_project,
    lie_bracket,
    lie_derivative,
    metric_inner,
    normal_cross,
    poisson_solve,
    ricci,
    ricci_sharp,
    riemann,
    riemann_nested,
    rough_laplacian,
    scalar_laplacian,
    tensor_inner,
    transpose_gradient_apply,
    vorticity,
)
from .fields import ScalarField, TensorField11, VectorField, identity_tensor
from .manifold import Manifold, ManifoldKind, circle, make_manifold, sphere, torus
from .sphere import killing

__all__ = [name for name in dir() if not name.startswith("_")]
