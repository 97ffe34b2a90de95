# Helper for things.
# Second line of the comment.
def helped():
    return True


# About the class.
class Documented:
    # About the method.
    def m(self):
        """Docstring."""
        return None
