"""Domains, inclusions, set distances and region masks."""

from .curves import Circle, ClosedCurve, FourierStarCurve, RoundedPolygon, curve_from_dict
from .distances import SampledRegion, complement_distances, directed_distance, hausdorff_distance
from .io import load_geometry, save_geometry
from .regions import (
    RegionMask,
    component_polygon,
    connected_component_touching,
    domain_mask,
    erode,
    truncated_cone_contains,
)
from .shapes import AprioriCheck, AprioriReport, PlanarDomain, StarInclusion, check_apriori

__all__ = [
    "AprioriCheck",
    "AprioriReport",
    "Circle",
    "ClosedCurve",
    "FourierStarCurve",
    "PlanarDomain",
    "RegionMask",
    "RoundedPolygon",
    "SampledRegion",
    "StarInclusion",
    "check_apriori",
    "complement_distances",
    "component_polygon",
    "connected_component_touching",
    "curve_from_dict",
    "directed_distance",
    "domain_mask",
    "erode",
    "hausdorff_distance",
    "load_geometry",
    "save_geometry",
    "truncated_cone_contains",
]
