"""Campaign service: persistent store, orchestration core, and HTTP app."""

from .core import CampaignService, SubmitResult, TaskBatch
from .store import CampaignStore, ManifestEntry, SubsetTag

__all__ = [
    "CampaignService",
    "CampaignStore",
    "ManifestEntry",
    "SubmitResult",
    "SubsetTag",
    "TaskBatch",
]
