from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from ..ingest import Activity, Modality


class Group(str, Enum):
    INTENTION = "Intention"
    ACTUAL = "Actual"


class ClassLabel(IntEnum):
    """The 8 targets; the integer value is the serialized class id."""

    LiftingIntention = 0
    ActualLifting = 1
    CarryingIntention = 2
    ActualCarrying = 3
    HoldingIntention = 4
    ActualHolding = 5
    MountingIntention = 6
    ActualMounting = 7

    @classmethod
    def of(cls, activity: Activity, group: Group) -> "ClassLabel":
        return cls(2 * Activity(activity).index + (0 if Group(group) == Group.INTENTION else 1))

    @property
    def activity(self) -> Activity:
        return list(Activity)[self.value // 2]

    @property
    def group(self) -> Group:
        return Group.INTENTION if self.value % 2 == 0 else Group.ACTUAL


NUM_CLASSES = len(ClassLabel)


@dataclass(frozen=True)
class RecordingId:
    subject_id: int
    activity: Activity
    trial: int
    modality: Modality

    def sort_key(self):
        return (self.modality.value, self.subject_id, self.activity.index, self.trial)


@dataclass(frozen=True)
class Provenance:
    subject_id: int
    activity: Activity
    trial: int
    group: Group
    start: int
    copy: int = 0
    modality: Modality = Modality.SIGNAL

    def key(self) -> tuple:
        return (self.modality.value, self.subject_id, self.activity.index, self.trial,
                0 if self.group == Group.INTENTION else 1, self.start, self.copy)

    def recording_key(self) -> tuple:
        """Identity of the (subject, activity, trial, group) segment."""
        return self.key()[:5]


@dataclass(eq=False)
class GroupSegment:
    source: RecordingId
    group: Group
    data: np.ndarray


@dataclass(eq=False)
class LabeledExample:
    """One window; equality is identity so split membership is unambiguous."""

    label: ClassLabel
    window: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        if self.label.group != self.provenance.group:
            raise ValueError(f"label {self.label.name} disagrees with group {self.provenance.group}")

    @property
    def modality(self) -> Modality:
        return self.provenance.modality

    def with_window(self, window: np.ndarray, **prov_changes) -> "LabeledExample":
        prov = replace(self.provenance, **prov_changes) if prov_changes else self.provenance
        return LabeledExample(self.label, window, prov)


def label_counts(examples) -> np.ndarray:
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    for ex in examples:
        counts[int(ex.label)] += 1
    return counts
