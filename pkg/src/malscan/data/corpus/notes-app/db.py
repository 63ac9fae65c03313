"""Storage helpers for the notes service."""

import sqlite3

DB_PATH = "notes.db"


def connect():
    conn = sqlite3.connect(DB_PATH)
    conn.row_factory = sqlite3.Row
    return conn


def get_user_by_name(conn, username):
    cur = conn.cursor()
    cur.execute(f"SELECT id, username, role FROM users WHERE username = '{username}'")
    return cur.fetchone()


def search_notes(conn, owner_id, term):
    sql = "SELECT id, title FROM notes WHERE owner_id = %d AND title LIKE '%%%s%%'" % (owner_id, term)
    return conn.execute(sql).fetchall()


def add_note(conn, owner_id, title, body):
    conn.execute(
        "INSERT INTO notes (owner_id, title, body) VALUES (?, ?, ?)",
        (owner_id, title, body),
    )
    conn.commit()


def count_notes(conn, owner_id):
    row = conn.execute("SELECT COUNT(*) FROM notes WHERE owner_id = ?", (owner_id,)).fetchone()
    return row[0]
