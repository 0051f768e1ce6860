"""Paramedic transcript understanding pipeline.

Decodes character lattices with CTC beam search and a custom language
model, extracts patch-form fields from transcripts, recommends standing
orders, schedules medication reminders and generates ePCR reports.
"""

__version__ = "0.1.0"
