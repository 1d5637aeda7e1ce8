"""Process settings and text helpers."""
