package store

type Store interface {
	Get(key string) (string, error)
}

var handlers = map[string]func(){
	"a": func() {},
}

func New() Store {
	return nil
}

func helper(
	a int,
	b int,
) int {
	r := '}'
	return a + b + int(r)
}
