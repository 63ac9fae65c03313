from dataclasses import dataclass


@dataclass
class Point:
    """A point. def fake(): pass"""

    x: int
    y: int

    def norm(self):
        s = '''multi
line ( string'''
        return (self.x ** 2 +
                self.y ** 2) ** 0.5

    @staticmethod
    def origin():
        def inner():
            return 0
        return Point(inner(), 0)


class Empty: pass


async def fetch(url, *, timeout=3):
    return await get(url,
                     timeout=timeout)
