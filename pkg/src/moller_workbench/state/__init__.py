"""Report persistence and progress tracking."""
