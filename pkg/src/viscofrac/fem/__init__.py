from .elements import ELEMENTS, ElementType, element_type
from .mesh import Mesh, bar_mesh, dogbone_mesh, i_shape_mesh, read_mesh, rectangle_mesh, write_mesh
from .model import Discretization, apply_dirichlet
from .element import (damage_jacobian, damage_residual, element_internal_force, element_mass,
                      motion_jacobian, motion_residual, shape_matrices)

__all__ = [
    "ELEMENTS", "ElementType", "element_type", "Mesh", "bar_mesh", "dogbone_mesh",
    "i_shape_mesh", "read_mesh", "rectangle_mesh", "write_mesh", "Discretization",
    "apply_dirichlet", "damage_jacobian", "damage_residual", "element_internal_force", "element_mass", "motion_jacobian",
    "motion_residual", "shape_matrices",
]
