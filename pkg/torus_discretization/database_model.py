from peewee import CharField, DateTimeField, IntegerField, Model, Proxy, TextField

database_proxy = Proxy()


class BaseModel(Model):
    class Meta:
        database = database_proxy


class SweepResult(BaseModel):
    """
    One finished sweep row, stored under the content hash of everything that determines it.
    """

    key = CharField(primary_key=True, max_length=64)
    map_key = CharField(max_length=64, index=True)
    k = IntegerField()
    seed = IntegerField()
    analyses = CharField()
    row_json = TextField()
    created = DateTimeField()

    class Meta:
        table_name = "sweep_result"
