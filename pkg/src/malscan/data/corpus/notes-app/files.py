"""Attachment storage."""

import os

UPLOAD_DIR = "/srv/notes/uploads"
THUMB_DIR = "/srv/notes/thumbs"


def read_attachment(filename):
    path = os.path.join(UPLOAD_DIR, filename)
    with open(path, "rb") as fh:
        return fh.read()


def make_thumbnail(filename):
    src = os.path.join(UPLOAD_DIR, os.path.basename(filename))
    dst = os.path.join(THUMB_DIR, os.path.basename(filename))
    os.system("convert " + src + " -resize 128x128 " + dst)
    return dst


def list_attachments():
    return sorted(name for name in os.listdir(UPLOAD_DIR) if not name.startswith("."))


def attachment_size(filename):
    safe = os.path.basename(filename)
    return os.path.getsize(os.path.join(UPLOAD_DIR, safe))
