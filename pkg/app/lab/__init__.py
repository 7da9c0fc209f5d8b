from app.lab.geodesic_balls import ProfileTable, candidate_profile, s3_reference_profile
from app.lab.hawking import HawkingTable, hawking_table
from app.lab.warp_metric import WarpedMetric, build_metric, double, verify_hypotheses

__all__ = [
    "HawkingTable",
    "ProfileTable",
    "WarpedMetric",
    "build_metric",
    "candidate_profile",
    "double",
    "hawking_table",
    "s3_reference_profile",
    "verify_hypotheses",
]
