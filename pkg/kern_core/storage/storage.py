class StorageBase:
    def __init__(self, path):
        self.path = path

    def exists(self) -> bool:
        return self.path.exists() and self.path.is_file()

    def load(self):
        raise NotImplementedError

    def save(self, value):
        raise NotImplementedError
